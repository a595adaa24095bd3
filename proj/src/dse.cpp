#include "xbar/dse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "xbar/parallel.hpp"

namespace xbar::dse {

using json = nlohmann::json;
using topology::CrossbarConfig;

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

bool integral(double v) { return std::isfinite(v) && v == std::floor(v); }

void require_tech(const CrossbarConfig& c, std::initializer_list<TechnologyKind> ok, Knob k) {
    if (std::find(ok.begin(), ok.end(), c.tech) == ok.end())
        throw DomainError("knob " + to_string(k) + " does not apply to " + std::string(xbar::to_string(c.tech)));
}

std::string activation_name(const topology::Activation& a) {
    return a.partial() ? "pwa" + std::to_string(a.group_size) : "fwa";
}

}  // namespace

std::string to_string(Knob k) {
    switch (k) {
        case Knob::RON: return "r_on";
        case Knob::TFE: return "t_fe";
        case Knob::TMgO: return "t_mgo";
        case Knob::VBias: return "v_bias";
        case Knob::Gap: return "gap";
        case Knob::Activation: return "activation";
        case Knob::Topology: return "topology";
    }
    return "?";
}

Knob parse_knob(const std::string& s) {
    for (auto k : {Knob::RON, Knob::TFE, Knob::TMgO, Knob::VBias, Knob::Gap, Knob::Activation, Knob::Topology})
        if (s == to_string(k)) return k;
    throw UsageError("unknown sweep knob '" + s + "' (expected r_on, t_fe, t_mgo, v_bias, gap, activation or topology)");
}

CrossbarConfig apply_knob(const CrossbarConfig& base, Knob knob, double value) {
    if (!std::isfinite(value)) throw DomainError("sweep value must be finite");
    CrossbarConfig c = base;
    switch (knob) {
        case Knob::RON:
            require_tech(c, {TechnologyKind::SRAM, TechnologyKind::ReRAM, TechnologyKind::FeFET}, knob);
            if (!(value > 0)) throw DomainError("R_ON must be positive");
            c.knobs.r_on_ohms = value;
            break;
        case Knob::TFE:
            require_tech(c, {TechnologyKind::FeFET}, knob);
            (void)devices::fefet_params_for_thickness(value);  // domain check
            c.knobs.t_fe_nm = value;
            if (!c.knobs.r_on_ohms) c.knobs.r_on_ohms = 60e3;
            break;
        case Knob::TMgO:
            require_tech(c, {TechnologyKind::SOTMRAM}, knob);
            (void)devices::mtj_resistance(value, devices::MtjState::Parallel);
            c.knobs.t_mgo_nm = value;
            break;
        case Knob::VBias:
            require_tech(c, {TechnologyKind::SRAM}, knob);
            c.knobs.r_on_ohms = devices::sram_on_resistance(value);
            break;
        case Knob::Gap: {
            require_tech(c, {TechnologyKind::ReRAM}, knob);
            if (!(value >= devices::kReramGapMinNm && value <= devices::kReramGapMaxNm))
                throw DomainError("ReRAM gap outside [0.34, 1.09] nm");
            devices::ReRAMParams p;
            p.gap_nm = value;
            c.knobs.r_on_ohms = devices::reram_small_signal_resistance(p);
            break;
        }
        case Knob::Activation:
            if (!integral(value) || value < 0) throw DomainError("activation value is a PWA group size (0 = FWA)");
            c.activation = value == 0 ? topology::Activation::full() : topology::Activation::partial_rows(int(value));
            break;
        case Knob::Topology:
            if (value != 0 && value != 1) throw DomainError("topology value is 0 (gate-input) or 1 (drain-input)");
            c.topology = value == 0 ? Topology::GateInput : Topology::DrainInput;
            break;
    }
    c.validate();
    return c;
}

void SweepSpec::validate() const {
    if (values.empty()) throw DomainError("sweep needs at least one value");
    for (double v : values) (void)apply_knob(base, knob, v);
    if (want_nf && samples == 0) throw DomainError("sweep needs at least one NF sample");
    sampler.validate();
    if (!(threshold >= 0)) throw DomainError("O_MAX threshold must be non-negative");
}

SweepResult sweep(const SweepSpec& spec) {
    spec.validate();
    SweepResult out;
    out.knob = spec.knob;
    out.label = spec.label;
    const int workers = resolve_workers(spec.workers);
    for (double v : spec.values) {
        SweepPoint p;
        p.value = v;
        p.cfg = apply_knob(spec.base, spec.knob, v);
        const auto model = topology::make_model(p.cfg);
        p.corners = model.corners();
        if (spec.want_nf) {
            metrics::NFOptions o;
            o.samples = spec.samples;
            o.seed = spec.seed;
            o.workers = workers;
            p.nf = metrics::nf_distribution(p.cfg, model, spec.sampler, o).pooled;
        }
        if (spec.want_sm) {
            auto so = spec.sm;
            so.workers = workers;
            so.seed = spec.seed;
            p.sm = metrics::sense_margin_curve(p.cfg, model, spec.sm_x_max, so);
            p.o_max = metrics::o_max(*p.sm, spec.threshold);
        }
        out.points.push_back(std::move(p));
    }
    return out;
}

SweepResult sweep_ron(TechnologyKind tech, const std::vector<double>& values, SweepSpec spec) {
    if (tech == TechnologyKind::SOTMRAM)
        throw DomainError("SOT-MRAM has no independent R_ON knob; sweep t_mgo instead");
    spec.base.tech = tech;
    spec.knob = Knob::RON;
    spec.values = values;
    if (spec.label.empty()) spec.label = std::string(xbar::to_string(tech));
    return sweep(spec);
}

SweepResult sweep_tfe(const std::vector<double>& values, SweepSpec spec) {
    spec.base.tech = TechnologyKind::FeFET;
    spec.base.knobs.r_on_ohms = 60e3;
    spec.knob = Knob::TFE;
    spec.values = values;
    if (spec.label.empty()) spec.label = "fefet";
    return sweep(spec);
}

std::vector<SweepResult> sweep_tmgo(const std::vector<double>& values,
                                    const std::vector<topology::Activation>& schemes, SweepSpec spec) {
    if (schemes.empty()) throw DomainError("T_MgO sweep needs at least one activation scheme");
    spec.base.tech = TechnologyKind::SOTMRAM;
    spec.base.knobs.r_on_ohms.reset();
    spec.knob = Knob::TMgO;
    spec.values = values;
    std::vector<SweepResult> out;
    for (const auto& a : schemes) {
        auto s = spec;
        s.base.activation = a;
        s.label = activation_name(a);
        out.push_back(sweep(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweep output

void write_sweep_nf_csv(std::ostream& os, const std::vector<SweepResult>& results) {
    os << "series,knob,value,stat,nf\n";
    for (const auto& r : results)
        for (const auto& p : r.points) {
            if (!p.nf) continue;
            const auto& d = *p.nf;
            const std::string head = r.label + ',' + to_string(r.knob) + ',' + fmt(p.value) + ',';
            os << head << "count," << d.count << '\n';
            os << head << "excluded_zero_ideal," << d.excluded_zero_ideal << '\n';
            os << head << "failed," << d.failed << '\n';
            os << head << "min," << fmt(d.min) << '\n';
            os << head << "q1," << fmt(d.q1) << '\n';
            os << head << "median," << fmt(d.median) << '\n';
            os << head << "q3," << fmt(d.q3) << '\n';
            os << head << "max," << fmt(d.max) << '\n';
            os << head << "mean," << fmt(d.mean) << '\n';
        }
}

void write_sweep_sm_csv(std::ostream& os, const std::vector<SweepResult>& results) {
    os << "series,knob,value,x,i_x_min,i_xm1_max,sm_x\n";
    for (const auto& r : results)
        for (const auto& p : r.points) {
            if (!p.sm) continue;
            for (const auto& q : p.sm->points)
                os << r.label << ',' << to_string(r.knob) << ',' << fmt(p.value) << ',' << q.x << ','
                   << fmt(q.i_x_min) << ',' << fmt(q.i_xm1_max) << ',' << fmt(q.sm) << '\n';
        }
}

void write_sweep_points_csv(std::ostream& os, const std::vector<SweepResult>& results) {
    os << "series,knob,value,r_on,r_hrs,r_off,r_off_h,o_max\n";
    for (const auto& r : results)
        for (const auto& p : r.points) {
            os << r.label << ',' << to_string(r.knob) << ',' << fmt(p.value) << ',' << fmt(p.corners.r_on) << ','
               << fmt(p.corners.r_hrs) << ',' << fmt(p.corners.r_off) << ',' << fmt(p.corners.r_off_h) << ',';
            if (p.o_max) os << *p.o_max;
            os << '\n';
        }
}

void write_gnuplot_box(std::ostream& os, const std::vector<SweepResult>& results) {
    os << "# series knob value min q1 median q3 max\n";
    for (const auto& r : results)
        for (const auto& p : r.points)
            if (p.nf)
                os << r.label << ' ' << to_string(r.knob) << ' ' << fmt(p.value) << ' ' << fmt(p.nf->min) << ' '
                   << fmt(p.nf->q1) << ' ' << fmt(p.nf->median) << ' ' << fmt(p.nf->q3) << ' ' << fmt(p.nf->max)
                   << '\n';
}

void write_gnuplot_sm(std::ostream& os, const std::vector<SweepResult>& results) {
    bool first = true;
    for (const auto& r : results)
        for (const auto& p : r.points) {
            if (!p.sm) continue;
            if (!first) os << "\n\n";
            first = false;
            os << "# " << r.label << ' ' << to_string(r.knob) << '=' << fmt(p.value) << "\n# x sm_x_uA\n";
            for (const auto& q : p.sm->points) os << q.x << ' ' << fmt(q.sm * 1e6) << '\n';
        }
}

// ---------------------------------------------------------------------------
// Comparison

CrossbarConfig optimized_config(TechnologyKind tech, CrossbarConfig base) {
    base.tech = tech;
    base.knobs.r_on_ohms.reset();
    base.activation = topology::Activation::full();
    switch (tech) {
        case TechnologyKind::SRAM: return apply_knob(base, Knob::RON, 60e3);
        case TechnologyKind::ReRAM: return apply_knob(base, Knob::Gap, 0.53);
        case TechnologyKind::FeFET: return apply_knob(apply_knob(base, Knob::TFE, 7.0), Knob::RON, 60e3);
        case TechnologyKind::SOTMRAM: return apply_knob(apply_knob(base, Knob::TMgO, 1.3), Knob::Activation, 8);
    }
    throw DomainError("unknown technology");
}

std::string optimized_description(TechnologyKind tech) {
    switch (tech) {
        case TechnologyKind::SRAM: return "R_ON 60 kOhm";
        case TechnologyKind::ReRAM: return "gap 0.53 nm";
        case TechnologyKind::FeFET: return "T_FE 7 nm, R_ON 60 kOhm";
        case TechnologyKind::SOTMRAM: return "T_MgO 1.3 nm, PWA(8)";
    }
    return "?";
}

const TechReport& ComparisonReport::at(TechnologyKind t) const {
    for (const auto& r : techs)
        if (r.tech == t) return r;
    throw DomainError("technology " + std::string(xbar::to_string(t)) + " is not in the report");
}

ComparisonReport compare_technologies(const CompareOptions& opts) {
    if (opts.techs.empty()) throw DomainError("comparison needs at least one technology");
    if (opts.samples == 0) throw DomainError("comparison needs at least one NF sample");
    if (opts.inference && opts.variation_seeds < 0) throw DomainError("variation seed count must be non-negative");
    VariationConfig{opts.sigma_frac, opts.seed}.validate();
    opts.sampler.validate();

    ComparisonReport rep;
    rep.options = opts;
    std::vector<TechnologyKind> order;
    for (auto t : kAllTechnologies)
        if (std::find(opts.techs.begin(), opts.techs.end(), t) != opts.techs.end()) order.push_back(t);

    std::optional<inference::DeskModel> model;
    std::optional<inference::DeskDataset> data;
    if (opts.inference) {
        model = inference::load_model(opts.model);
        data = inference::load_dataset(opts.dataset);
    }
    const int workers = resolve_workers(opts.workers);
    for (auto tech : order) {
        TechReport r;
        r.tech = tech;
        r.settings = optimized_description(tech);
        r.cfg = optimized_config(tech, opts.base);
        const auto cells = topology::make_model(r.cfg);
        r.corners = cells.corners();

        metrics::NFOptions no;
        no.samples = opts.samples;
        no.seed = opts.seed;
        no.workers = workers;
        r.nf = metrics::nf_distribution(r.cfg, cells, opts.sampler, no).pooled;
        metrics::SMOptions so;
        so.seed = opts.seed;
        so.workers = workers;
        r.sm = metrics::sense_margin_curve(r.cfg, cells, 0, so);
        r.o_max = metrics::o_max(r.sm, opts.threshold);

        if (opts.inference) {
            inference::InferenceConfig ic;
            ic.tile = r.cfg;
            ic.max_samples = opts.inference_samples;
            ic.workers = workers;
            ic.mode = inference::Mode::Ideal;
            r.ideal_accuracy = inference::run_inference(*model, *data, ic, cells).accuracy;
            ic.mode = inference::Mode::Solver;
            r.nominal_accuracy = inference::run_inference(*model, *data, ic, cells).accuracy;
            double sum = 0.0;
            for (int k = 0; k < opts.variation_seeds; ++k) {
                ic.variation = VariationConfig{opts.sigma_frac, opts.seed + std::uint64_t(k)};
                const double acc = inference::run_inference(*model, *data, ic, cells).accuracy;
                r.variation_accuracy.push_back(acc);
                sum += acc;
            }
            r.mean_variation_accuracy = opts.variation_seeds > 0 ? sum / opts.variation_seeds : r.nominal_accuracy;
            r.has_inference = true;
        }
        rep.techs.push_back(std::move(r));
    }
    return rep;
}

namespace {

json nf_json(const metrics::NFDistribution& d) {
    return {{"count", d.count}, {"excluded_zero_ideal", d.excluded_zero_ideal}, {"failed", d.failed},
            {"min", d.min},     {"q1", d.q1},
            {"median", d.median}, {"q3", d.q3},
            {"max", d.max},     {"mean", d.mean}};
}

}  // namespace

void write_comparison_json(std::ostream& os, const ComparisonReport& r) {
    const auto& o = r.options;
    json techs = json::array();
    for (const auto& t : r.techs) {
        json sm = json::array();
        for (const auto& p : t.sm.points)
            sm.push_back({{"x", p.x}, {"i_x_min", p.i_x_min}, {"i_xm1_max", p.i_xm1_max}, {"sm", p.sm}});
        json knobs = {{"t_fe_nm", t.cfg.knobs.t_fe_nm}, {"t_mgo_nm", t.cfg.knobs.t_mgo_nm},
                      {"activation", activation_name(t.cfg.activation)}};
        knobs["r_on_ohms"] = t.cfg.knobs.r_on_ohms ? json(*t.cfg.knobs.r_on_ohms) : json(nullptr);
        json entry = {{"tech", xbar::to_string(t.tech)},
                      {"settings", t.settings},
                      {"knobs", knobs},
                      {"corners",
                       {{"r_on", t.corners.r_on},
                        {"r_hrs", t.corners.r_hrs},
                        {"r_off", t.corners.r_off},
                        {"r_off_h", t.corners.r_off_h}}},
                      {"nf", nf_json(t.nf)},
                      {"sm", sm},
                      {"o_max", t.o_max}};
        if (t.has_inference)
            entry["inference"] = {{"ideal_accuracy", t.ideal_accuracy},
                                  {"nominal_accuracy", t.nominal_accuracy},
                                  {"nominal_drop", t.nominal_drop()},
                                  {"variation_accuracy", t.variation_accuracy},
                                  {"mean_variation_accuracy", t.mean_variation_accuracy},
                                  {"variation_drop", t.variation_drop()}};
        techs.push_back(entry);
    }
    std::vector<const TechReport*> by_nf;
    for (const auto& t : r.techs) by_nf.push_back(&t);
    std::stable_sort(by_nf.begin(), by_nf.end(),
                     [](const TechReport* a, const TechReport* b) { return a->nf.median < b->nf.median; });
    json ordering = json::array();
    for (const auto* t : by_nf) ordering.push_back(xbar::to_string(t->tech));

    json j = {{"format", "xbar-compare"},
              {"version", 1},
              {"seed", o.seed},
              {"samples", o.samples},
              {"rows", o.base.rows},
              {"cols", o.base.cols},
              {"sampler", metrics::to_string(o.sampler.kind)},
              {"threshold_amps", o.threshold},
              {"technologies", techs},
              {"nf_median_order", ordering}};
    if (o.inference)
        j["inference"] = {{"samples", o.inference_samples},
                          {"sigma_frac", o.sigma_frac},
                          {"variation_seeds", o.variation_seeds}};
    os << j.dump(1) << '\n';
}

}  // namespace xbar::dse
