#pragma once

#include <string>

#include "sqed/lattice.hpp"
#include "sqed/symplectic.hpp"

namespace sqed {

// First and second moments over quadratures R = (x_1..x_N, p_1..p_N);
// vacuum covariance is identity/2.
struct GaussianState {
    Vec mean;
    Mat cov;

    Eigen::Index n_modes() const { return mean.size() / 2; }
};

GaussianState vacuum(Eigen::Index n_modes);

// smallest eigenvalue of cov + (i/2) Omega; physical states are >= -1e-9
double uncertainty_defect(const GaussianState& state);
void require_valid(const GaussianState& state);

// mean -> S mean + d, cov -> S cov S^T
GaussianState apply(const GaussianState& state, const SymplecticOp& op);

// Schroedinger flow of the free Hamiltonian for time t: a rotation by
// omega(k) t per particle mode, conjugated into the position register.
SymplecticOp free_evolution(const LatticeConfig& cfg, double t);

// flow of (delta_m/2) sum_x phi^dag phi for one step
SymplecticOp counterterm_evolution(const LatticeConfig& cfg, double delta_m, double dt);

// flow of a general quadratic Hamiltonian (1/2) R^T W R for time t
SymplecticOp quadratic_flow(const Mat& w, double t);

// phase-space displacement by alpha on one mode
SymplecticOp displacement(Eigen::Index n_modes, Eigen::Index mode, cplx alpha);

// normal-ordered occupation of one mode
double number_mean(const GaussianState& state, Eigen::Index mode);
Vec number_means(const GaussianState& state);

// interacting-vacuum moments: vacuum pushed through the inverse
// ground-state unitary
GaussianState ground_state(const LatticeConfig& cfg);

// text snapshot: "modes N", mean line, then 2N covariance rows
std::string snapshot(const GaussianState& state);
GaussianState parse_snapshot(const std::string& text);

}  // namespace sqed
