#include "xbar/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace xbar::config {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

bool integral(const Json& v) {
    if (v.is_number_integer()) return true;
    if (!v.is_number_float()) return false;
    const double d = v.get<double>();
    return d == static_cast<double>(static_cast<long long>(d));
}

// Type rule for one leaf, keyed by the default value.
bool compatible(const Json& def, const Json& v, const std::string& key) {
    if (def.is_null()) return v.is_null() || v.is_number();
    if (def.is_boolean()) return v.is_boolean();
    if (def.is_string()) return v.is_string();
    if (def.is_array()) return v.is_array();
    if (def.is_number_integer()) return integral(v);
    if (def.is_number()) return v.is_number();
    if (def.is_object()) return v.is_object();
    throw StateError("unsupported default type at " + key);
}

std::string type_name(const Json& def) {
    if (def.is_null()) return "number or null";
    if (def.is_boolean()) return "boolean";
    if (def.is_string()) return "string";
    if (def.is_array()) return "array";
    if (def.is_number_integer()) return "integer";
    if (def.is_number()) return "number";
    return "object";
}

void collect(const Json& j, const std::string& prefix, std::vector<std::string>& out) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string k = join(prefix, it.key());
        if (it->is_object())
            collect(*it, k, out);
        else
            out.push_back(k);
    }
}

// Seed of a config: the only key whose default is null but must be integral.
bool is_seed_key(const std::string& key) { return key == "seed"; }

const Json& at_path(const Json& cfg, const std::string& dotted) {
    const Json* node = &cfg;
    std::size_t pos = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', pos);
        const std::string part = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (!node->is_object() || !node->contains(part)) throw StateError("missing config key " + dotted);
        node = &(*node)[part];
        if (dot == std::string::npos) return *node;
        pos = dot + 1;
    }
}

double num(const Json& cfg, const std::string& key) { return at_path(cfg, key).get<double>(); }
int integer(const Json& cfg, const std::string& key) { return static_cast<int>(at_path(cfg, key).get<double>()); }
std::size_t count(const Json& cfg, const std::string& key) {
    const double v = at_path(cfg, key).get<double>();
    if (v < 0) throw DomainError(key + " must be non-negative");
    return static_cast<std::size_t>(v);
}
std::string str(const Json& cfg, const std::string& key) { return at_path(cfg, key).get<std::string>(); }
std::optional<double> opt(const Json& cfg, const std::string& key) {
    const Json& v = at_path(cfg, key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

}  // namespace

Json default_config() {
    const topology::CrossbarConfig a;
    const solver::SolverOptions so;
    const metrics::WorkloadSampler ws;
    const metrics::NFOptions nf;
    const metrics::SMOptions sm;
    const surrogate::DatasetOptions ds;
    const surrogate::Hyper hy;
    const inference::InferenceConfig ic;
    const dse::CompareOptions co;

    Json techs = Json::array();
    for (auto t : co.techs) techs.push_back(std::string(to_string(t)));

    Json c;
    c["seed"] = nullptr;
    c["workers"] = 0;
    c["array"] = {{"tech", std::string(to_string(a.tech))},
                  {"rows", a.rows},
                  {"cols", a.cols},
                  {"topology", std::string(to_string(a.topology))},
                  {"fidelity", std::string(to_string(a.fidelity))},
                  {"v_wl", a.v_wl},
                  {"v_bl", a.v_bl},
                  {"activation", a.activation.group_size}};
    c["parasitics"] = {{"wire_res", a.parasitics.wire_res},
                       {"via_res", a.parasitics.via_res},
                       {"r_driver", a.parasitics.r_driver},
                       {"r_sink", a.parasitics.r_sink},
                       {"vertical_pitch_um", optional_number(a.parasitics.vertical_pitch_um)},
                       {"horizontal_pitch_um", optional_number(a.parasitics.horizontal_pitch_um)},
                       {"scale", 1.0}};
    c["device"] = {{"r_on", optional_number(a.knobs.r_on_ohms)},
                   {"t_fe", a.knobs.t_fe_nm},
                   {"t_mgo", a.knobs.t_mgo_nm},
                   {"reram_access", a.knobs.reram_access_ohms},
                   {"k_mw", a.knobs.k_mw},
                   {"v_reset", a.knobs.v_reset}};
    c["solver"] = {{"residual_tol", so.residual_tol},
                   {"max_iterations", so.max_iterations},
                   {"min_damping", so.min_damping}};
    c["workload"] = {{"sampler", metrics::to_string(ws.kind)},
                     {"p_input", ws.p_input},
                     {"p_weight", ws.p_weight},
                     {"samples", nf.samples},
                     {"reference", metrics::to_string(nf.reference)},
                     {"keep_samples", false}};
    c["sm"] = {{"mode", metrics::to_string(sm.mode)},
               {"x_max", 0},
               {"random_samples", sm.random_samples},
               {"exhaustive_budget", sm.exhaustive_budget},
               {"placement_budget", sm.placement_budget},
               {"column", sm.column},
               {"threshold", 1e-6}};
    c["solve"] = {{"inputs", "1"}, {"weights", "1"}, {"voltages", false}, {"netlist", false}};
    c["sweep"] = {{"knob", "r_on"},
                  {"values", Json::array({1e4, 2e4, 6e4, 2.5e5})},
                  {"activations", Json::array()},
                  {"nf", true},
                  {"sm", true}};
    c["variation"] = {{"sigma_frac", 0.1}, {"seeds", 10}, {"inference", false}};
    c["surrogate"] = {{"records", ds.records},
                      {"test_fraction", ds.test_fraction},
                      {"sigma_frac", ds.sigma_frac},
                      {"sampler", "mixed"},
                      {"hidden", hy.hidden},
                      {"activation", surrogate::to_string(hy.activation)},
                      {"optimizer", surrogate::to_string(hy.optimizer)},
                      {"learning_rate", hy.learning_rate},
                      {"momentum", hy.momentum},
                      {"epochs", hy.epochs},
                      {"batch_size", hy.batch_size}};
    c["inference"] = {{"model", ""},
                      {"dataset", ""},
                      {"mode", inference::to_string(inference::Mode::Solver)},
                      {"input_bits", ic.input_bits},
                      {"weight_bits", ic.weight_bits},
                      {"max_samples", 100},
                      {"nf_probe_samples", ic.nf_probe_samples},
                      {"surrogate", ""},
                      {"sigma_frac", 0.0}};
    c["compare"] = {{"techs", techs},
                    {"inference", co.inference},
                    {"inference_samples", co.inference_samples},
                    {"sigma_frac", co.sigma_frac},
                    {"variation_seeds", co.variation_seeds}};
    return c;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<std::string> leaf_keys(const Json& cfg) {
    std::vector<std::string> out;
    collect(cfg, "", out);
    return out;
}

std::string nearest_key(std::string_view key, const Json& cfg) {
    std::string best;
    std::size_t best_d = std::string::npos;
    std::vector<std::string> names = leaf_keys(cfg);
    for (auto it = cfg.begin(); it != cfg.end(); ++it)
        if (it->is_object()) names.push_back(it.key());
    for (const auto& k : names) {
        const std::size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

void merge_layer(Json& base, const Json& layer, const std::string& origin) {
    if (!layer.is_object()) throw UsageError(origin + ": config must be a JSON object");
    const Json defaults = default_config();
    // Walk the layer with explicit prefixes so error messages carry full keys.
    struct Walker {
        const Json& defaults;
        const std::string& origin;
        void operator()(Json& b, const Json& l, const std::string& prefix) const {
            for (auto it = l.begin(); it != l.end(); ++it) {
                const std::string key = join(prefix, it.key());
                if (!b.contains(it.key())) {
                    throw UsageError(origin + ": unknown key '" + key + "' (did you mean '" +
                                     nearest_key(key, defaults) + "'?)");
                }
                Json& slot = b[it.key()];
                const Json& def = at_path(defaults, key);
                if (def.is_object()) {
                    if (!it->is_object()) throw UsageError(origin + ": '" + key + "' must be an object");
                    (*this)(slot, *it, key);
                    continue;
                }
                if (!compatible(def, *it, key) || (is_seed_key(key) && !it->is_null() && !integral(*it)))
                    throw UsageError(origin + ": '" + key + "' must be " +
                                     (is_seed_key(key) ? std::string("an integer or null") : type_name(def)));
                if (is_seed_key(key) && !it->is_null()) {
                    if (it->get<double>() < 0) throw UsageError(origin + ": 'seed' must be non-negative");
                    slot = it->get<std::uint64_t>();
                } else if (def.is_number_integer()) {
                    slot = static_cast<long long>(it->get<double>());
                } else if (def.is_number_float() && it->is_number()) {
                    slot = it->get<double>();
                } else {
                    slot = *it;
                }
            }
        }
    };
    Walker{defaults, origin}(base, layer, "");
}

void set_value(Json& cfg, const std::string& key, Json value) {
    Json layer = std::move(value);
    std::size_t end = key.size();
    while (true) {
        const std::size_t dot = end == 0 ? std::string::npos : key.rfind('.', end - 1);
        const std::string part =
            dot == std::string::npos ? key.substr(0, end) : key.substr(dot + 1, end - dot - 1);
        if (part.empty()) throw UsageError("config key '" + key + "' has an empty component");
        Json wrap;
        wrap[part] = std::move(layer);
        layer = std::move(wrap);
        if (dot == std::string::npos) break;
        end = dot;
    }
    merge_layer(cfg, layer, "--set " + key);
}

void apply_override(Json& cfg, std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw UsageError("override '" + std::string(assignment) + "' is not of the form key=value");
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    set_value(cfg, key, std::move(value));
}

Json load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
    Json cfg = default_config();
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) throw UsageError("cannot open config file " + file.string());
        std::stringstream text;
        text << in.rdbuf();
        Json layer;
        const std::string body = text.str();
        if (body.find_first_not_of(" \t\r\n") != std::string::npos) {
            try {
                layer = Json::parse(body, nullptr, true, true);
            } catch (const Json::parse_error& e) {
                throw UsageError(file.string() + ": malformed JSON: " + e.what());
            }
        } else {
            layer = Json::object();
        }
        if (layer.is_object() && layer.contains("format") && layer["format"] == "xbar-manifest") {
            if (!layer.contains("config")) throw UsageError(file.string() + ": manifest has no config");
            layer = Json(layer["config"]);
        }
        merge_layer(cfg, layer, file.string());
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    return cfg;
}

topology::CrossbarConfig array_config(const Json& cfg) {
    topology::CrossbarConfig a;
    a.tech = parse_technology(str(cfg, "array.tech"));
    a.rows = integer(cfg, "array.rows");
    a.cols = integer(cfg, "array.cols");
    a.topology = parse_topology(str(cfg, "array.topology"));
    a.fidelity = parse_fidelity(str(cfg, "array.fidelity"));
    a.v_wl = num(cfg, "array.v_wl");
    a.v_bl = num(cfg, "array.v_bl");
    a.activation.group_size = integer(cfg, "array.activation");
    a.parasitics.wire_res = num(cfg, "parasitics.wire_res");
    a.parasitics.via_res = num(cfg, "parasitics.via_res");
    a.parasitics.r_driver = num(cfg, "parasitics.r_driver");
    a.parasitics.r_sink = num(cfg, "parasitics.r_sink");
    a.parasitics.vertical_pitch_um = opt(cfg, "parasitics.vertical_pitch_um");
    a.parasitics.horizontal_pitch_um = opt(cfg, "parasitics.horizontal_pitch_um");
    const double k = num(cfg, "parasitics.scale");
    if (!(k >= 0)) throw DomainError("parasitics.scale must be >= 0");
    if (k != 1.0) a.parasitics = a.parasitics.scaled(k);
    a.knobs.r_on_ohms = opt(cfg, "device.r_on");
    a.knobs.t_fe_nm = num(cfg, "device.t_fe");
    a.knobs.t_mgo_nm = num(cfg, "device.t_mgo");
    a.knobs.reram_access_ohms = num(cfg, "device.reram_access");
    a.knobs.k_mw = num(cfg, "device.k_mw");
    a.knobs.v_reset = num(cfg, "device.v_reset");
    a.validate();
    return a;
}

solver::SolverOptions solver_options(const Json& cfg) {
    solver::SolverOptions s;
    s.residual_tol = num(cfg, "solver.residual_tol");
    s.max_iterations = integer(cfg, "solver.max_iterations");
    s.min_damping = num(cfg, "solver.min_damping");
    if (!(s.residual_tol > 0) || s.max_iterations < 1 || !(s.min_damping > 0 && s.min_damping <= 1))
        throw DomainError("solver options out of range");
    return s;
}

metrics::WorkloadSampler workload_sampler(const Json& cfg) {
    metrics::WorkloadSampler w;
    w.kind = metrics::parse_sampler_kind(str(cfg, "workload.sampler"));
    w.p_input = num(cfg, "workload.p_input");
    w.p_weight = num(cfg, "workload.p_weight");
    w.validate();
    return w;
}

metrics::NFOptions nf_options(const Json& cfg, int workers) {
    metrics::NFOptions o;
    o.samples = count(cfg, "workload.samples");
    o.reference = metrics::parse_nf_reference(str(cfg, "workload.reference"));
    o.seed = seed(cfg).value_or(0);
    o.workers = workers;
    o.keep_samples = at_path(cfg, "workload.keep_samples").get<bool>();
    o.solver = solver_options(cfg);
    return o;
}

metrics::SMOptions sm_options(const Json& cfg, int workers) {
    metrics::SMOptions o;
    o.mode = metrics::parse_sm_mode(str(cfg, "sm.mode"));
    o.random_samples = count(cfg, "sm.random_samples");
    o.seed = seed(cfg).value_or(0);
    o.exhaustive_budget = count(cfg, "sm.exhaustive_budget");
    o.placement_budget = count(cfg, "sm.placement_budget");
    o.column = integer(cfg, "sm.column");
    o.workers = workers;
    o.solver = solver_options(cfg);
    return o;
}

surrogate::DatasetOptions dataset_options(const Json& cfg, int workers) {
    surrogate::DatasetOptions o;
    o.records = count(cfg, "surrogate.records");
    o.seed = seed(cfg).value_or(0);
    o.test_fraction = num(cfg, "surrogate.test_fraction");
    o.sigma_frac = num(cfg, "surrogate.sigma_frac");
    o.workers = workers;
    o.solver = solver_options(cfg);
    return o;
}

surrogate::Hyper hyper(const Json& cfg) {
    surrogate::Hyper h;
    h.hidden = integer(cfg, "surrogate.hidden");
    h.activation = surrogate::parse_activation(str(cfg, "surrogate.activation"));
    h.optimizer = surrogate::parse_optimizer(str(cfg, "surrogate.optimizer"));
    h.learning_rate = num(cfg, "surrogate.learning_rate");
    h.momentum = num(cfg, "surrogate.momentum");
    h.epochs = integer(cfg, "surrogate.epochs");
    h.batch_size = integer(cfg, "surrogate.batch_size");
    h.seed = seed(cfg).value_or(0);
    return h;
}

std::optional<std::uint64_t> seed(const Json& cfg) {
    const Json& v = at_path(cfg, "seed");
    if (v.is_null()) return std::nullopt;
    return v.get<std::uint64_t>();
}

std::vector<double> number_list(const Json& cfg, const std::string& dotted) {
    const Json& v = at_path(cfg, dotted);
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) throw UsageError("'" + dotted + "' must hold numbers only");
        out.push_back(e.get<double>());
    }
    return out;
}

topology::BitVector parse_bits(const std::string& text, int length, const std::string& what) {
    topology::BitVector out;
    for (char ch : text) {
        if (ch == '0' || ch == '1')
            out.push_back(static_cast<std::uint8_t>(ch - '0'));
        else if (ch != ' ' && ch != ',' && ch != '_')
            throw UsageError(what + ": '" + std::string(1, ch) + "' is not a bit");
    }
    if (out.size() == 1) out.assign(static_cast<std::size_t>(length), out[0]);
    if (out.size() != static_cast<std::size_t>(length))
        throw UsageError(what + ": expected 1 or " + std::to_string(length) + " bits, got " +
                         std::to_string(out.size()));
    return out;
}

}  // namespace xbar::config
