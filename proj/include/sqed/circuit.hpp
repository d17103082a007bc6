#pragma once

#include <string>
#include <variant>
#include <vector>

#include "sqed/lattice.hpp"
#include "sqed/symplectic.hpp"

namespace sqed {

// Optical elements, acting on annihilation operators:
//   PS(i, theta):      a_i -> e^{i theta} a_i
//   BS(i, j, theta, phi): (a_i, a_j) -> [[cos, -e^{i phi} sin], [e^{-i phi} sin, cos]]
//   TMS(i, j, xi):     a_i -> cosh(xi) a_i + sinh(xi) a_j^dag  (and i <-> j)
//   SMS(i, r, phi):    a_i -> cosh(r) a_i + e^{i phi} sinh(r) a_i^dag
struct BeamSplitter {
    Eigen::Index i, j;
    double theta, phi;
};
struct PhaseShifter {
    Eigen::Index mode;
    double theta;
};
struct TwoModeSqueezer {
    Eigen::Index i, j;
    double xi;
};
struct SingleModeSqueezer {
    Eigen::Index mode;
    double r, phi;
};
using CircuitElement =
    std::variant<BeamSplitter, PhaseShifter, TwoModeSqueezer, SingleModeSqueezer>;

struct OpticalCircuit {
    Eigen::Index n_modes = 0;
    std::vector<CircuitElement> elements;  // in application order
};

// element-by-element action on a mode map (map := element o map)
void apply_element(ModeMap& map, const CircuitElement& el);

ModeMap circuit_mode_map(const OpticalCircuit& circuit);
SymplecticOp recompose(const OpticalCircuit& circuit);

// Factors a passive (unitary) mixer into beam splitters and phase shifters.
std::vector<CircuitElement> reck_elements(const CMat& unitary);

// Bloch-Messiah style factorization: passive, squeeze layer, passive.
// Round-trip error is verified internally to 1e-8.
OpticalCircuit decompose_to_circuit(const SymplecticOp& op);

// The ground-state unitary in its native structure: a DFT mixer per field
// block followed by the two-mode (and self-paired single-mode) squeezers.
OpticalCircuit groundstate_circuit(const LatticeConfig& cfg);

// One element per line: "BS i j theta phi", "PS i theta", "TMS i j xi",
// "SMS i r phi". A leading "# modes N" line pins the register size.
std::string serialize(const OpticalCircuit& circuit);
OpticalCircuit parse_circuit(const std::string& text);

// Takagi factorization of a complex symmetric matrix: a = w diag(s) w^T
// with w unitary and s >= 0 (helper for the factorization, exposed for tests).
CMat takagi(const CMat& a, Vec& sigma);

}  // namespace sqed
