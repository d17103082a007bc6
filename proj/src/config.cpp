#include "sqed/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sqed/errors.hpp"
#include "sqed/version.hpp"

namespace sqed {
namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + " " + what);
}

void check_keys(const ojson& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a) known = true;
        if (!known) fail(path.empty() ? key : path + "." + key, "is not a recognized key");
    }
}

const ojson* find(const ojson& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

void read_int(const ojson& obj, const std::string& path, const char* key, int& out) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_number_integer()) fail(path + "." + key, "must be an integer");
        out = v->get<int>();
    }
}

void read_int64(const ojson& obj, const std::string& path, const char* key,
                std::int64_t& out) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_number_integer()) fail(path + "." + key, "must be an integer");
        out = v->get<std::int64_t>();
    }
}

void read_u64(const ojson& obj, const std::string& path, const char* key,
              std::uint64_t& out) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_number_unsigned() && !v->is_number_integer())
            fail(path + "." + key, "must be a non-negative integer");
        if (v->is_number_integer() && v->get<std::int64_t>() < 0)
            fail(path + "." + key, "must be a non-negative integer");
        out = v->get<std::uint64_t>();
    }
}

void read_double(const ojson& obj, const std::string& path, const char* key, double& out) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_number()) fail(path + "." + key, "must be a number");
        out = v->get<double>();
    }
}

void read_bool(const ojson& obj, const std::string& path, const char* key, bool& out) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_boolean()) fail(path + "." + key, "must be a boolean");
        out = v->get<bool>();
    }
}

void read_string(const ojson& obj, const std::string& path, const char* key,
                 std::string& out) {
    if (const ojson* v = find(obj, key)) {
        if (!v->is_string()) fail(path + "." + key, "must be a string");
        out = v->get<std::string>();
    }
}

FieldKind parse_kind(const std::string& name, const std::string& path) {
    if (name == kind_name(FieldKind::Scalar1)) return FieldKind::Scalar1;
    if (name == kind_name(FieldKind::Scalar2)) return FieldKind::Scalar2;
    if (name == kind_name(FieldKind::Photon)) return FieldKind::Photon;
    fail(path, "must be one of scalar, antiscalar, photon");
}

MomentumIndex parse_momentum(const ojson& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) fail(path, "must be an array of three integers");
    MomentumIndex k;
    for (int i = 0; i < 3; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number_integer())
            fail(path, "must be an array of three integers");
        k.c[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)].get<int>();
    }
    return k;
}

void parse_lattice(const ojson& obj, LatticeConfig& out) {
    check_keys(obj, "lattice", {"d", "L", "m"});
    read_int(obj, "lattice", "d", out.dim);
    read_int(obj, "lattice", "L", out.extent);
    read_double(obj, "lattice", "m", out.scalar_mass);
    out.validate();
}

void parse_backend(const ojson& obj, BackendConfig& out) {
    check_keys(obj, "backend", {"kind", "n_max", "representation", "max_dimension"});
    std::string kind = backend_name(out.kind);
    read_string(obj, "backend", "kind", kind);
    if (kind == "gaussian")
        out.kind = Backend::Gaussian;
    else if (kind == "fock")
        out.kind = Backend::Fock;
    else
        fail("backend.kind", "must be gaussian or fock");
    read_int(obj, "backend", "n_max", out.n_max);
    if (out.n_max < 1) fail("backend.n_max", "must be >= 1");
    std::string rep = rep_name(out.rep);
    read_string(obj, "backend", "representation", rep);
    if (rep == "particle")
        out.rep = Rep::Particle;
    else if (rep == "position")
        out.rep = Rep::Position;
    else
        fail("backend.representation", "must be particle or position");
    read_int64(obj, "backend", "max_dimension", out.max_dimension);
    if (out.max_dimension < 1) fail("backend.max_dimension", "must be >= 1");
}

void parse_schedule(const ojson& obj, ScheduleParams& out) {
    check_keys(obj, "schedule",
               {"half_window", "plateau_half_window", "dt", "e_target",
                "delta_m_coefficient"});
    read_double(obj, "schedule", "half_window", out.half_window);
    read_double(obj, "schedule", "plateau_half_window", out.plateau_half_window);
    read_double(obj, "schedule", "dt", out.dt);
    read_double(obj, "schedule", "e_target", out.e_target);
    if (const ojson* v = find(obj, "delta_m_coefficient")) {
        if (v->is_null())
            out.delta_m_coefficient.reset();
        else if (v->is_number())
            out.delta_m_coefficient = v->get<double>();
        else
            fail("schedule.delta_m_coefficient", "must be a number or null");
    }
}

void parse_in_state(const ojson& arr, WavepacketSpec& out) {
    if (!arr.is_array()) fail("in_state", "must be an array of wavepacket profiles");
    out.profiles.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string path = "in_state[" + std::to_string(i) + "]";
        const ojson& p = arr[i];
        if (!p.is_object()) fail(path, "must be an object");
        check_keys(p, path, {"kind", "peak", "amplitudes"});
        WavepacketProfile profile;
        const ojson* kind = find(p, "kind");
        if (!kind || !kind->is_string()) fail(path + ".kind", "must be a string");
        profile.kind = parse_kind(kind->get<std::string>(), path + ".kind");
        const ojson* peak = find(p, "peak");
        if (!peak) fail(path + ".peak", "is required");
        profile.peak = parse_momentum(*peak, path + ".peak");
        const ojson* amps = find(p, "amplitudes");
        if (!amps || !amps->is_array()) fail(path + ".amplitudes", "must be an array");
        for (std::size_t j = 0; j < amps->size(); ++j) {
            const std::string apath = path + ".amplitudes[" + std::to_string(j) + "]";
            const ojson& a = (*amps)[j];
            if (!a.is_object()) fail(apath, "must be an object");
            check_keys(a, apath, {"k", "amp"});
            const ojson* k = find(a, "k");
            if (!k) fail(apath + ".k", "is required");
            const ojson* amp = find(a, "amp");
            if (!amp || !amp->is_array() || amp->size() != 2 || !(*amp)[0].is_number() ||
                !(*amp)[1].is_number())
                fail(apath + ".amp", "must be [re, im]");
            profile.amplitudes.emplace_back(
                parse_momentum(*k, apath + ".k"),
                cplx((*amp)[0].get<double>(), (*amp)[1].get<double>()));
        }
        out.profiles.push_back(std::move(profile));
    }
}

void parse_run(const ojson& obj, RunBlock& out) {
    check_keys(obj, "run",
               {"interaction", "sign", "n_samples", "constraint_epsilon",
                "truncation_check"});
    std::string variant = variant_name(out.variant);
    read_string(obj, "run", "interaction", variant);
    if (variant == "full")
        out.variant = InteractionVariant::Full;
    else if (variant == "transverse")
        out.variant = InteractionVariant::Transverse;
    else
        fail("run.interaction", "must be full or transverse");
    read_int(obj, "run", "sign", out.sign);
    read_int(obj, "run", "n_samples", out.n_samples);
    read_double(obj, "run", "constraint_epsilon", out.constraint_epsilon);
    read_bool(obj, "run", "truncation_check", out.truncation_check);
}

void parse_output(const ojson& obj, OutputConfig& out) {
    check_keys(obj, "output", {"seed", "report_path", "trace_path"});
    read_u64(obj, "output", "seed", out.seed);
    read_string(obj, "output", "report_path", out.report_path);
    read_string(obj, "output", "trace_path", out.trace_path);
}

ojson momentum_json(const MomentumIndex& k) {
    return ojson::array({k.c[0], k.c[1], k.c[2]});
}

}  // namespace

ScatterOptions RunConfig::scatter_options() const {
    ScatterOptions opt;
    opt.n_max = backend.n_max;
    opt.rep = backend.rep;
    opt.variant = run.variant;
    opt.sign = run.sign;
    opt.seed = output.seed;
    opt.n_samples = run.n_samples;
    opt.constraint_epsilon = run.constraint_epsilon;
    opt.truncation_check = run.truncation_check;
    return opt;
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.in_state.profiles = {{FieldKind::Scalar1, MomentumIndex{{0, 0, 0}},
                              {{MomentumIndex{{0, 0, 0}}, 1.0}}},
                             {FieldKind::Scalar2, MomentumIndex{{0, 0, 0}},
                              {{MomentumIndex{{0, 0, 0}}, 1.0}}}};
    return cfg;
}

RunConfig parse_run_config(const std::string& text) {
    ojson root = ojson::parse(text, nullptr, false);
    if (root.is_discarded()) throw ConfigError("config: not valid JSON");
    if (!root.is_object()) throw ConfigError("config: top level must be an object");
    check_keys(root, "", {"lattice", "backend", "schedule", "in_state", "run", "output"});

    RunConfig cfg = default_run_config();
    if (const ojson* v = find(root, "lattice")) {
        if (!v->is_object()) throw ConfigError("config: lattice must be an object");
        parse_lattice(*v, cfg.lattice);
    }
    if (const ojson* v = find(root, "backend")) {
        if (!v->is_object()) throw ConfigError("config: backend must be an object");
        parse_backend(*v, cfg.backend);
    }
    if (const ojson* v = find(root, "schedule")) {
        if (!v->is_object()) throw ConfigError("config: schedule must be an object");
        parse_schedule(*v, cfg.schedule);
    }
    if (const ojson* v = find(root, "in_state")) parse_in_state(*v, cfg.in_state);
    if (const ojson* v = find(root, "run")) {
        if (!v->is_object()) throw ConfigError("config: run must be an object");
        parse_run(*v, cfg.run);
    }
    if (const ojson* v = find(root, "output")) {
        if (!v->is_object()) throw ConfigError("config: output must be an object");
        parse_output(*v, cfg.output);
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
    ojson root;
    root["lattice"] = {{"d", cfg.lattice.dim},
                       {"L", cfg.lattice.extent},
                       {"m", cfg.lattice.scalar_mass}};
    root["backend"] = {{"kind", backend_name(cfg.backend.kind)},
                       {"n_max", cfg.backend.n_max},
                       {"representation", rep_name(cfg.backend.rep)},
                       {"max_dimension", cfg.backend.max_dimension}};
    ojson schedule;
    schedule["half_window"] = cfg.schedule.half_window;
    schedule["plateau_half_window"] = cfg.schedule.plateau_half_window;
    schedule["dt"] = cfg.schedule.dt;
    schedule["e_target"] = cfg.schedule.e_target;
    if (cfg.schedule.delta_m_coefficient)
        schedule["delta_m_coefficient"] = *cfg.schedule.delta_m_coefficient;
    else
        schedule["delta_m_coefficient"] = nullptr;
    root["schedule"] = std::move(schedule);
    ojson in_state = ojson::array();
    for (const WavepacketProfile& p : cfg.in_state.profiles) {
        ojson amps = ojson::array();
        for (const auto& [k, amp] : p.amplitudes)
            amps.push_back({{"k", momentum_json(k)},
                            {"amp", ojson::array({amp.real(), amp.imag()})}});
        in_state.push_back({{"kind", kind_name(p.kind)},
                            {"peak", momentum_json(p.peak)},
                            {"amplitudes", std::move(amps)}});
    }
    root["in_state"] = std::move(in_state);
    root["run"] = {{"interaction", variant_name(cfg.run.variant)},
                   {"sign", cfg.run.sign},
                   {"n_samples", cfg.run.n_samples},
                   {"constraint_epsilon", cfg.run.constraint_epsilon},
                   {"truncation_check", cfg.run.truncation_check}};
    root["output"] = {{"seed", cfg.output.seed},
                      {"report_path", cfg.output.report_path},
                      {"trace_path", cfg.output.trace_path}};
    return root.dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(serialize_config(cfg)); }

const char* backend_name(Backend b) { return b == Backend::Gaussian ? "gaussian" : "fock"; }
const char* rep_name(Rep r) { return r == Rep::Particle ? "particle" : "position"; }
const char* variant_name(InteractionVariant v) {
    return v == InteractionVariant::Full ? "full" : "transverse";
}

}  // namespace sqed
