#include "dce/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dce/errors.hpp"
#include "dce/io.hpp"
#include "dce/parallel.hpp"

extern char** environ;

namespace dce {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Typed access to one object of the configuration tree. Every read records
// the key so unknown keys can be reported.
class Section {
  public:
    Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) fail("", "expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    double number(const std::string& key, double fallback) const {
        seen_.insert(key);
        if (!node_.contains(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_number()) fail(key, "expected a number");
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
        seen_.insert(key);
        if (!node_.contains(key)) return fallback;
        const auto& v = node_.at(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
        fail(key, "expected a non-negative integer");
    }

    bool flag(const std::string& key, bool fallback) const {
        seen_.insert(key);
        if (!node_.contains(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        seen_.insert(key);
        if (!node_.contains(key)) return fallback;
        const auto& v = node_.at(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }

    const Json* child(const std::string& key) const {
        seen_.insert(key);
        return node_.contains(key) ? &node_.at(key) : nullptr;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.count(key)) fail(key, "unknown key");
        }
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        std::string field = path_;
        if (!key.empty()) field += field.empty() ? key : "." + key;
        throw ConfigurationError(field + ": " + what);
    }

    const std::string& path() const { return path_; }

  private:
    const Json& node_;
    std::string path_;
    mutable std::set<std::string> seen_;
};

// Re-throws a parameter check as a schema error on the given section.
template <class F>
void validated(const std::string& section, F&& check) {
    try {
        check();
    } catch (const ParameterError& e) {
        throw ConfigurationError(section + ": " + e.what());
    } catch (const ScheduleError& e) {
        throw ConfigurationError(section + ": " + e.what());
    }
}

OptionKind parse_kind(const Section& s) {
    const auto k = s.text("kind", "put");
    if (k == "put") return OptionKind::Put;
    if (k == "call") return OptionKind::Call;
    s.fail("kind", "expected 'put' or 'call'");
}

ModelSpec parse_model(const Json& node) {
    Section s(node, "model");
    const auto type = s.text("type", "");
    ModelSpec model;
    if (type == "black_scholes") {
        BlackScholesParams p;
        p.s0 = s.number("s0", p.s0);
        p.sigma = s.number("sigma", p.sigma);
        p.r = s.number("r", p.r);
        p.mu = s.number("mu", p.mu);
        validated("model", [&] { p.validate(); });
        model = p;
    } else if (type == "merton") {
        MertonParams p;
        p.s0 = s.number("s0", p.s0);
        p.sigma = s.number("sigma", p.sigma);
        p.r = s.number("r", p.r);
        p.mu = s.number("mu", p.mu);
        p.jump_mean = s.number("jump_mean", p.jump_mean);
        p.jump_std = s.number("jump_std", p.jump_std);
        p.intensity = s.number("intensity", p.intensity);
        validated("model", [&] { p.validate(); });
        model = p;
    } else if (type == "hull_white") {
        HullWhiteParams p;
        p.a_q = s.number("a_q", p.a_q);
        p.sigma_q = s.number("sigma_q", p.sigma_q);
        p.a_p = s.number("a_p", p.a_p);
        p.sigma_p = s.number("sigma_p", p.sigma_p);
        p.flat_forward = s.number("flat_forward", p.flat_forward);
        validated("model", [&] { p.validate(); });
        model = p;
    } else {
        s.fail("type", "expected black_scholes, merton or hull_white");
    }
    s.reject_unknown();
    return model;
}

std::vector<double> parse_dates(const Section& s, const std::string& key, double maturity, double steps_per_year) {
    const Json* v = s.child(key);
    if (!v) {
        // default: every grid date after t = 0
        return uniform_dates(maturity, static_cast<std::size_t>(std::llround(maturity * steps_per_year)));
    }
    if (v->is_number_unsigned() || v->is_number_integer()) {
        const auto n = v->get<std::int64_t>();
        if (n < 1) s.fail(key, "expected a positive count or a list of dates");
        return uniform_dates(maturity, static_cast<std::size_t>(n));
    }
    if (!v->is_array()) s.fail(key, "expected a positive count or a list of dates");
    std::vector<double> out;
    for (const auto& d : *v) {
        if (!d.is_number()) s.fail(key, "dates must be numbers");
        out.push_back(d.get<double>());
    }
    return out;
}

ProductSpec parse_product(const Json& node, double steps_per_year) {
    Section s(node, "product");
    const auto variant = s.text("variant", "");
    ProductSpec spec;
    if (variant == "european") {
        EuropeanSpec p;
        p.kind = parse_kind(s);
        p.strike = s.number("strike", p.strike);
        p.maturity = s.number("maturity", p.maturity);
        spec = p;
    } else if (variant == "bermudan") {
        BermudanSpec p;
        p.kind = parse_kind(s);
        p.strike = s.number("strike", p.strike);
        p.maturity = s.number("maturity", p.maturity);
        p.exercise_dates = parse_dates(s, "exercise_dates", p.maturity, steps_per_year);
        spec = p;
    } else if (variant == "barrier_up_out") {
        BarrierUpOutSpec p;
        p.kind = parse_kind(s);
        p.strike = s.number("strike", p.strike);
        p.barrier = s.number("barrier", p.barrier);
        p.maturity = s.number("maturity", p.maturity);
        p.monitoring_dates = parse_dates(s, "monitoring_dates", p.maturity, steps_per_year);
        spec = p;
    } else if (variant == "swaption") {
        const double rate = s.number("fixed_rate", 0.01094);
        const double notional = s.number("notional", 100.0);
        const auto years = s.count("years", 5);
        if (years < 1 || years > 100) s.fail("years", "expected 1..100");
        auto p = yearly_swaption(rate, notional, static_cast<int>(years));
        p.receiver = s.flag("receiver", true);
        spec = p;
    } else {
        s.fail("variant", "expected european, bermudan, barrier_up_out or swaption");
    }
    s.reject_unknown();
    return spec;
}

EngineConfig parse_engine(const Section& s, EngineConfig e) {
    e.degree = s.count("N", e.degree);
    e.domain_k = s.number("k", e.domain_k);
    e.split = s.flag("split", e.split);
    e.split_left = s.count("split_left", e.split_left);
    e.split_right = s.count("split_right", e.split_right);
    if (s.has("split_point")) e.split_point = s.number("split_point", 0.0);
    e.smoothing = s.flag("smoothing", e.smoothing);
    e.alpha = s.number("alpha", e.alpha);
    e.real_world_domain = s.flag("real_world_domain", e.real_world_domain);
    e.cf.cos_terms = s.count("cf_terms", e.cf.cos_terms);
    e.cf.self_check = s.flag("cf_self_check", e.cf.self_check);
    if (!(e.alpha > 0.0 && e.alpha < 1.0)) s.fail("alpha", "must lie in (0, 1)");
    if (e.degree < 4) s.fail("N", "must be >= 4");
    if (!(e.domain_k > 0.0)) s.fail("k", "must be > 0");
    validated(s.path(), [&] { e.validate(); });
    return e;
}

double product_maturity(const ProductSpec& spec) {
    return std::visit([](const auto& p) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, SwaptionSpec>) {
            return p.exercise_dates.back();
        } else {
            return p.maturity;
        }
    }, spec);
}

std::string label_for(const EngineConfig& e) {
    if (!e.split) return "DC_" + std::to_string(e.degree);
    const std::size_t l = e.split_left ? e.split_left : e.degree / 2;
    const std::size_t r = e.split_right ? e.split_right : e.degree / 2;
    return "DC_" + std::to_string(l) + "_" + std::to_string(r);
}

std::vector<DcVariant> default_variants(const EngineConfig& base) {
    std::vector<DcVariant> out;
    for (std::size_t n : {base.degree / 4, base.degree / 2, base.degree}) {
        if (n < 4) continue;
        EngineConfig e = base;
        e.degree = n;
        e.split = false;
        out.push_back({label_for(e), e});
    }
    EngineConfig s = base;
    s.split = true;
    s.split_left = s.split_right = 0;
    out.push_back({label_for(s), s});
    return out;
}

Json profile_stats(const ExposureProfile& p) {
    Json j;
    j["paths"] = p.paths;
    j["alpha"] = p.alpha;
    j["discounted"] = p.discounted;
    j["ee_t0"] = p.ee.front();
    j["terminal_ee"] = p.ee.back();
    j["terminal_pfe"] = p.pfe.back();
    j["mean_ee"] = deterministic_mean(p.ee);
    j["max_ee"] = *std::max_element(p.ee.begin(), p.ee.end());
    j["max_pfe"] = *std::max_element(p.pfe.begin(), p.pfe.end());
    j["terminal_alive"] = p.alive_counts.back();
    return j;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

std::string csv_cell(double v) { return std::isfinite(v) ? format_double(v) : ""; }

}  // namespace

Ensembles simulate_all(const RunConfig& cfg, const std::vector<double>& grid) {
    Ensembles e;
    for (Measure m : cfg.simulation.measures) {
        const auto t0 = Clock::now();
        const auto seed = m == Measure::RiskNeutral ? cfg.simulation.seed_q : cfg.simulation.seed_p;
        e.by_measure.emplace(m, simulate(cfg.model, m, cfg.simulation.paths, grid, seed));
        e.seconds[m] = seconds_since(t0);
    }
    return e;
}

ExposureOptions exposure_options(const RunConfig& cfg, const std::string& method) {
    ExposureOptions o;
    o.alpha = cfg.engine.alpha;
    o.retain_matrix = cfg.retain_matrix;
    o.method = method;
    return o;
}

MethodRun run_dc(const RunConfig& cfg, const EngineConfig& engine, const std::string& label, const Product& product,
                 const std::vector<double>& grid, const Ensembles& ens) {
    MethodRun r;
    r.method = label;
    InductionTiming timing;
    const auto vfs = backward_induction(cfg.model, product, grid, engine, nullptr, &timing);
    r.price = vfs.price();
    r.phases["precompute"] = timing.precompute_seconds;
    r.phases["induct"] = timing.induct_seconds;
    const ChebValuer valuer(vfs, product);
    double eval_total = 0.0;
    for (const auto& [m, e] : ens.by_measure) {
        const auto t0 = Clock::now();
        r.profiles.emplace(m, compute_exposure(valuer, e, product, cfg.model, exposure_options(cfg, "dc")));
        const double ev = seconds_since(t0);
        eval_total += ev;
        r.seconds[m] = timing.precompute_seconds + timing.induct_seconds + ev;
    }
    r.phases["evaluate"] = eval_total;
    return r;
}

MethodRun run_lsm(const RunConfig& cfg, const Product& product, const std::vector<double>& grid,
                  const Ensembles& ens) {
    MethodRun r;
    r.method = "lsm";
    const auto vf = lsm_value_functions(cfg.model, product, grid, cfg.lsm);
    r.price = vf.price;
    r.phases["simulate_pricing"] = vf.simulate_seconds;
    r.phases["regress"] = vf.regress_seconds;
    double eval_total = 0.0;
    for (const auto& [m, e] : ens.by_measure) {
        const auto t0 = Clock::now();
        r.profiles.emplace(m, lsm_exposure(vf, product, e, cfg.model, exposure_options(cfg, "lsm")));
        const double ev = seconds_since(t0);
        eval_total += ev;
        r.seconds[m] = vf.simulate_seconds + vf.regress_seconds + ev;
    }
    r.phases["evaluate"] = eval_total;
    return r;
}

MethodRun run_reference(const RunConfig& cfg, const Product& product, const std::vector<double>& grid,
                        const Ensembles& ens) {
    MethodRun r;
    r.method = "full_reeval";
    const auto ref = build_reference(cfg, product, grid);
    r.price = ref.price;
    r.phases["build"] = ref.seconds;
    double eval_total = 0.0;
    for (const auto& [m, e] : ens.by_measure) {
        const auto t0 = Clock::now();
        r.profiles.emplace(m, full_reevaluation_exposure(*ref.valuer, e, product, cfg.model,
                                                         exposure_options(cfg, "full_reeval")));
        const double ev = seconds_since(t0);
        eval_total += ev;
        r.seconds[m] = ref.seconds + ev;
    }
    r.phases["evaluate"] = eval_total;
    return r;
}

CompareRow error_row(const MethodRun& run, const MethodRun& ref, double normalizer) {
    CompareRow row;
    row.label = run.method;
    row.price = run.price;
    row.price_error = std::fabs(run.price - ref.price) / normalizer;
    row.ee_price = row.pfe_price = row.ee_risk = row.pfe_risk = std::numeric_limits<double>::quiet_NaN();
    for (const auto& [m, p] : run.profiles) {
        const auto e = profile_error(p, ref.profiles.at(m), normalizer);
        if (m == Measure::RiskNeutral) {
            row.ee_price = e.ee;
            row.pfe_price = e.pfe;
        } else {
            row.ee_risk = e.ee;
            row.pfe_risk = e.pfe;
        }
    }
    row.seconds_q = run.seconds.count(Measure::RiskNeutral) ? run.seconds.at(Measure::RiskNeutral) : 0.0;
    row.seconds_p = run.seconds.count(Measure::RealWorld) ? run.seconds.at(Measure::RealWorld) : 0.0;
    return row;
}

namespace {

void write_errors_csv(const std::string& path, const std::vector<CompareRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "method,price,price_error,ee_price,pfe_price,ee_risk,pfe_risk\n";
    for (const auto& r : rows) {
        out << r.label << ',' << csv_cell(r.price) << ',' << csv_cell(r.price_error) << ',' << csv_cell(r.ee_price)
            << ',' << csv_cell(r.pfe_price) << ',' << csv_cell(r.ee_risk) << ',' << csv_cell(r.pfe_risk) << '\n';
    }
}

void write_timings_csv(const std::string& path, const std::vector<CompareRow>& rows, const MethodRun& ref) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "method,seconds_Q,seconds_P\n";
    auto secs = [](const std::map<Measure, double>& s, Measure m) {
        return s.count(m) ? csv_cell(s.at(m)) : std::string();
    };
    for (const auto& r : rows) out << r.label << ',' << csv_cell(r.seconds_q) << ',' << csv_cell(r.seconds_p) << '\n';
    out << "full_reeval," << secs(ref.seconds, Measure::RiskNeutral) << ',' << secs(ref.seconds, Measure::RealWorld)
        << '\n';
}

}  // namespace

std::vector<std::string> preset_names() { return {"european_bs", "barrier_bs", "bermudan_merton", "swaption_hw"}; }

Json preset(const std::string& name) {
    Json bs = {{"type", "black_scholes"}, {"s0", 100.0}, {"sigma", 0.25}, {"r", 0.03}, {"mu", 0.1}};
    Json sim = {{"M", 50000}, {"steps_per_year", 50}, {"T", 1.0}, {"seed_Q", 1}, {"seed_P", 2},
                {"measures", {"Q", "P"}}};
    Json lsm = {{"pricing_paths", 150000}, {"seed", 987654321}, {"degree", 0}};
    Json cfg;
    cfg["name"] = name;
    if (name == "european_bs") {
        cfg["model"] = bs;
        cfg["product"] = {{"variant", "european"}, {"kind", "put"}, {"strike", 100.0}, {"maturity", 1.0}};
        cfg["engine"] = {{"N", 128}, {"k", 5.0}, {"split", false}, {"smoothing", true}, {"alpha", 0.975}};
    } else if (name == "barrier_bs") {
        cfg["model"] = bs;
        cfg["product"] = {{"variant", "barrier_up_out"}, {"kind", "call"}, {"strike", 100.0}, {"barrier", 130.0},
                          {"maturity", 1.0}, {"monitoring_dates", 50}};
        cfg["engine"] = {{"N", 64}, {"k", 5.0}, {"split", false}, {"smoothing", true}, {"alpha", 0.975}};
    } else if (name == "bermudan_merton") {
        cfg["model"] = {{"type", "merton"}, {"s0", 100.0}, {"sigma", 0.25}, {"r", 0.03}, {"mu", 0.1},
                        {"jump_mean", -0.5}, {"jump_std", 0.4}, {"intensity", 0.4}};
        cfg["product"] = {{"variant", "bermudan"}, {"kind", "put"}, {"strike", 100.0}, {"maturity", 1.0},
                          {"exercise_dates", 50}};
        cfg["engine"] = {{"N", 256}, {"k", 5.0}, {"split", false}, {"smoothing", true}, {"alpha", 0.975}};
    } else if (name == "swaption_hw") {
        cfg["model"] = {{"type", "hull_white"}, {"a_q", 0.02}, {"sigma_q", 0.02}, {"a_p", 0.015},
                        {"sigma_p", 0.01}, {"flat_forward", 0.01}};
        cfg["product"] = {{"variant", "swaption"}, {"receiver", true}, {"fixed_rate", 0.01094},
                          {"notional", 100.0}, {"years", 5}};
        cfg["engine"] = {{"N", 128}, {"k", 5.0}, {"split", false}, {"smoothing", false}, {"alpha", 0.975}};
        sim["T"] = 5.0;
    } else {
        throw ConfigurationError("unknown preset '" + name + "'");
    }
    cfg["simulation"] = sim;
    cfg["methods"] = {"dc", "lsm", "full_reeval"};
    cfg["lsm"] = lsm;
    cfg["reference"] = {{"cos_terms", 4096}, {"cos_L", 10.0}, {"dc_N", 512}};
    cfg["output"] = {{"dir", "out/" + name}, {"retain_exposure_matrix", false}};
    cfg["threads"] = 0;
    return cfg;
}

std::vector<std::string> current_environment() {
    std::vector<std::string> out;
    for (char** e = environ; e && *e; ++e) out.emplace_back(*e);
    return out;
}

void apply_env_overrides(Json& tree, const std::vector<std::string>& environment) {
    const std::string prefix = "DCE_";
    for (const auto& entry : environment) {
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = entry.substr(prefix.size(), eq - prefix.size());
        const std::string raw = entry.substr(eq + 1);
        if (key.empty()) continue;

        std::vector<std::string> parts;
        for (std::size_t pos = 0;;) {
            const auto next = key.find("__", pos);
            parts.push_back(key.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
            if (next == std::string::npos) break;
            pos = next + 2;
        }
        Json* node = &tree;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            if (!node->is_object()) throw ConfigurationError("environment override " + key + ": not an object path");
            // match existing keys case-insensitively, otherwise use lower case
            std::string lower = parts[i];
            std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
            std::string name = lower;
            for (const auto& [k, v] : node->items()) {
                std::string kl = k;
                std::transform(kl.begin(), kl.end(), kl.begin(), [](unsigned char c) { return std::tolower(c); });
                if (kl == lower) name = k;
            }
            if (i + 1 == parts.size()) {
                Json value = Json::parse(raw, nullptr, false);
                if (value.is_discarded()) value = raw;
                (*node)[name] = value;
            } else {
                if (!node->contains(name)) (*node)[name] = Json::object();
                node = &(*node)[name];
            }
        }
    }
}

RunConfig parse_config(const Json& tree) {
    Section root(tree, "");
    RunConfig cfg;
    cfg.echo = tree;
    cfg.name = root.text("name", "run");

    const Json* sim_node = root.child("simulation");
    const Json empty = Json::object();
    Section sim(sim_node ? *sim_node : empty, "simulation");
    cfg.simulation.steps_per_year = sim.number("steps_per_year", cfg.simulation.steps_per_year);
    if (!(cfg.simulation.steps_per_year > 0.0)) sim.fail("steps_per_year", "must be > 0");

    const Json* model_node = root.child("model");
    if (!model_node) root.fail("model", "missing");
    cfg.model = parse_model(*model_node);
    const Json* product_node = root.child("product");
    if (!product_node) root.fail("product", "missing");
    cfg.product = parse_product(*product_node, cfg.simulation.steps_per_year);
    const double maturity = product_maturity(cfg.product);

    cfg.simulation.paths = sim.count("M", cfg.simulation.paths);
    if (cfg.simulation.paths < 1) sim.fail("M", "must be >= 1");
    cfg.simulation.maturity = sim.number("T", maturity);
    if (std::fabs(cfg.simulation.maturity - maturity) > 1e-12) sim.fail("T", "must equal the product maturity");
    cfg.simulation.seed_q = sim.count("seed_Q", cfg.simulation.seed_q);
    cfg.simulation.seed_p = sim.count("seed_P", cfg.simulation.seed_p);
    if (const Json* ms = sim.child("measures")) {
        if (!ms->is_array() || ms->empty()) sim.fail("measures", "expected a non-empty list of Q/P");
        cfg.simulation.measures.clear();
        for (const auto& m : *ms) {
            if (!m.is_string()) sim.fail("measures", "expected Q or P");
            try {
                cfg.simulation.measures.push_back(measure_from_string(m.get<std::string>()));
            } catch (const ParameterError&) {
                sim.fail("measures", "expected Q or P");
            }
        }
        std::sort(cfg.simulation.measures.begin(), cfg.simulation.measures.end());
        cfg.simulation.measures.erase(std::unique(cfg.simulation.measures.begin(), cfg.simulation.measures.end()),
                                      cfg.simulation.measures.end());
    }
    sim.reject_unknown();

    const Json* engine_node = root.child("engine");
    const Section es(engine_node ? *engine_node : empty, "engine");
    cfg.engine = parse_engine(es, EngineConfig{});
    es.reject_unknown();

    if (const Json* methods = root.child("methods")) {
        if (!methods->is_array() || methods->empty()) root.fail("methods", "expected a non-empty list");
        cfg.methods.clear();
        for (const auto& m : *methods) {
            const std::string name = m.is_string() ? m.get<std::string>() : "";
            if (name != "dc" && name != "lsm" && name != "full_reeval") {
                root.fail("methods", "expected entries dc, lsm or full_reeval");
            }
            if (std::find(cfg.methods.begin(), cfg.methods.end(), name) == cfg.methods.end()) cfg.methods.push_back(name);
        }
    }

    if (const Json* lsm_node = root.child("lsm")) {
        Section ls(*lsm_node, "lsm");
        cfg.lsm.pricing_paths = ls.count("pricing_paths", cfg.lsm.pricing_paths);
        cfg.lsm.seed = ls.count("seed", cfg.lsm.seed);
        cfg.lsm.degree = ls.count("degree", cfg.lsm.degree);
        cfg.lsm.domain_k = ls.number("k", cfg.lsm.domain_k);
        validated("lsm", [&] { cfg.lsm.validate(); });
        ls.reject_unknown();
    }

    if (const Json* ref_node = root.child("reference")) {
        Section rs(*ref_node, "reference");
        cfg.reference.cos.terms = rs.count("cos_terms", cfg.reference.cos.terms);
        cfg.reference.cos.truncation_l = rs.number("cos_L", cfg.reference.cos.truncation_l);
        cfg.reference.dc_degree = rs.count("dc_N", cfg.reference.dc_degree);
        if (cfg.reference.cos.terms < 16) rs.fail("cos_terms", "must be >= 16");
        if (!(cfg.reference.cos.truncation_l > 0.0)) rs.fail("cos_L", "must be > 0");
        if (cfg.reference.dc_degree < 4) rs.fail("dc_N", "must be >= 4");
        rs.reject_unknown();
    }

    if (const Json* cmp_node = root.child("compare")) {
        Section cs(*cmp_node, "compare");
        cfg.compare_lsm = cs.flag("lsm", cfg.compare_lsm);
        if (const Json* vs = cs.child("variants")) {
            if (!vs->is_array()) cs.fail("variants", "expected a list");
            for (std::size_t i = 0; i < vs->size(); ++i) {
                Section v((*vs)[i], "compare.variants[" + std::to_string(i) + "]");
                EngineConfig e = parse_engine(v, cfg.engine);
                const std::string label = v.text("label", label_for(e));
                v.reject_unknown();
                cfg.variants.push_back({label, e});
            }
        }
        cs.reject_unknown();
    }

    if (const Json* out_node = root.child("output")) {
        Section os(*out_node, "output");
        cfg.output_dir = os.text("dir", cfg.output_dir);
        cfg.retain_matrix = os.flag("retain_exposure_matrix", cfg.retain_matrix);
        os.reject_unknown();
    }
    cfg.threads = root.count("threads", 0);
    root.reject_unknown();

    // product/model compatibility and schedule checks
    try {
        Product product(cfg.product, cfg.model);
        product.decision_mask(make_time_grid(cfg.simulation.maturity, cfg.simulation.steps_per_year));
    } catch (const ConfigurationError& e) {
        throw ConfigurationError(std::string("product: ") + e.what());
    } catch (const ParameterError& e) {
        throw ConfigurationError(std::string("product: ") + e.what());
    } catch (const ScheduleError& e) {
        throw ConfigurationError(std::string("product: ") + e.what());
    }
    return cfg;
}

RunConfig load_config(const std::string& path_or_preset, const RunOverrides& overrides,
                      const std::vector<std::string>& environment) {
    Json tree;
    if (fs::exists(path_or_preset)) {
        std::ifstream in(path_or_preset);
        if (!in) throw ConfigurationError("cannot read " + path_or_preset);
        tree = Json::parse(in, nullptr, false);
        if (tree.is_discarded()) throw ConfigurationError(path_or_preset + ": not valid JSON");
    } else {
        const auto names = preset_names();
        if (std::find(names.begin(), names.end(), path_or_preset) == names.end()) {
            throw ConfigurationError("no such config file or preset: " + path_or_preset);
        }
        tree = preset(path_or_preset);
    }
    if (!tree.is_object()) throw ConfigurationError("configuration root must be an object");
    apply_env_overrides(tree, environment);
    if (overrides.seed) {
        tree["simulation"]["seed_Q"] = *overrides.seed;
        tree["simulation"]["seed_P"] = *overrides.seed + 1;
    }
    if (overrides.paths) tree["simulation"]["M"] = *overrides.paths;
    if (overrides.threads) tree["threads"] = *overrides.threads;
    if (overrides.out) tree["output"]["dir"] = *overrides.out;
    return parse_config(tree);
}

ReferenceBuild build_reference(const RunConfig& cfg, const Product& product, const std::vector<double>& grid) {
    ReferenceBuild ref;
    const auto t0 = Clock::now();
    const auto* bs = std::get_if<BlackScholesParams>(&cfg.model);
    const auto* eu = std::get_if<EuropeanSpec>(&cfg.product);
    if (bs && eu) {
        ref.valuer = std::make_unique<AnalyticEuropeanValuer>(*bs, *eu, grid);
        ref.price = bs_european(bs->s0, eu->strike, bs->r, bs->sigma, eu->maturity, eu->kind);
    } else if (product.is_equity()) {
        auto cos = std::make_unique<CosReference>(cos_backward_reference(cfg.model, product, grid, cfg.reference.cos));
        ref.price = cos->price();
        ref.valuer = std::move(cos);
    } else {
        EngineConfig e = cfg.engine;
        e.degree = cfg.reference.dc_degree;
        e.split = false;
        e.smoothing = false;
        auto vfs = std::make_shared<ValueFunctionSet>(backward_induction(cfg.model, product, grid, e));
        ref.price = vfs->price();
        ref.valuer = std::make_unique<ChebValuer>(*vfs, product);
        ref.storage = vfs;
    }
    ref.seconds = seconds_since(t0);
    return ref;
}

double error_normalizer(const RunConfig& cfg, const Product& product, double reference_price) {
    (void)cfg;
    if (product.is_equity() && product.has_early_exercise()) return product.s0();
    if (!(reference_price > 0.0)) throw NumericalError("error metric: reference price is not positive",
                                                       "price " + format_double(reference_price));
    return reference_price;
}

RunResult run(const RunConfig& cfg) {
    set_thread_count(cfg.threads);
    ensure_dir(cfg.output_dir);
    const auto grid = make_time_grid(cfg.simulation.maturity, cfg.simulation.steps_per_year);
    const Product product(cfg.product, cfg.model);
    const Ensembles ens = simulate_all(cfg, grid);

    RunResult result;
    for (const auto& m : cfg.methods) {
        if (m == "dc") result.runs.push_back(run_dc(cfg, cfg.engine, "dc", product, grid, ens));
        if (m == "lsm") result.runs.push_back(run_lsm(cfg, product, grid, ens));
        if (m == "full_reeval") result.runs.push_back(run_reference(cfg, product, grid, ens));
    }

    Json summary;
    summary["name"] = cfg.name;
    summary["version"] = DCE_VERSION;
    summary["model"] = model_name(cfg.model);
    summary["product"] = product.name();
    summary["config"] = cfg.echo;
    summary["seeds"] = {{"Q", cfg.simulation.seed_q}, {"P", cfg.simulation.seed_p}, {"lsm_pricing", cfg.lsm.seed}};
    summary["threads"] = thread_count();
    Json phases;
    for (const auto& [m, s] : ens.seconds) phases["simulate_" + to_string(m)] = s;
    Json methods = Json::object();
    for (const auto& r : result.runs) {
        Json jm;
        jm["price"] = r.price;
        for (const auto& [name, s] : r.phases) {
            jm["phases"][name] = s;
            if (r.method == "dc") phases[name] = s;
        }
        for (const auto& [m, s] : r.seconds) jm["seconds"][to_string(m)] = s;
        for (const auto& [m, p] : r.profiles) {
            const std::string tag = r.method + "_" + to_string(m);
            write_profile_csv((fs::path(cfg.output_dir) / ("profile_" + tag + ".csv")).string(), p);
            write_plot_dat((fs::path(cfg.output_dir) / ("plot_ee_" + tag + ".dat")).string(), "EE", p.times, p.ee);
            write_plot_dat((fs::path(cfg.output_dir) / ("plot_pfe_" + tag + ".dat")).string(), "PFE", p.times, p.pfe);
            jm["profiles"][to_string(m)] = profile_stats(p);
        }
        methods[r.method] = jm;
    }
    summary["phases"] = phases;
    summary["methods"] = methods;

    // EE under the pricing measure stays at the t = 0 price for European options
    if (std::holds_alternative<EuropeanSpec>(cfg.product)) {
        for (const auto& r : result.runs) {
            if (r.method != "dc" || !r.profiles.count(Measure::RiskNeutral)) continue;
            const auto& p = r.profiles.at(Measure::RiskNeutral);
            double dev = 0.0;
            double se = 0.0;
            for (std::size_t u = 0; u < p.ee.size(); ++u) {
                dev = std::max(dev, std::fabs(p.ee[u] - r.price));
                se = std::max(se, p.ee_stderr[u]);
            }
            summary["checks"]["ee_price_constant"] = dev <= 3.0 * se;
            summary["checks"]["ee_price_max_deviation"] = dev;
            summary["checks"]["ee_price_three_stderr"] = 3.0 * se;
        }
    }

    const auto ref_it = std::find_if(result.runs.begin(), result.runs.end(),
                                     [](const MethodRun& r) { return r.method == "full_reeval"; });
    if (ref_it != result.runs.end() && result.runs.size() > 1) {
        const double norm = error_normalizer(cfg, product, ref_it->price);
        std::vector<CompareRow> rows;
        for (const auto& r : result.runs) {
            if (&r != &*ref_it) rows.push_back(error_row(r, *ref_it, norm));
        }
        write_errors_csv((fs::path(cfg.output_dir) / "errors.csv").string(), rows);
        summary["error_normalizer"] = norm;
    }
    write_json((fs::path(cfg.output_dir) / "summary.json").string(), summary);
    result.summary = std::move(summary);
    return result;
}

std::vector<CompareRow> compare(const RunConfig& cfg) {
    set_thread_count(cfg.threads);
    ensure_dir(cfg.output_dir);
    const auto grid = make_time_grid(cfg.simulation.maturity, cfg.simulation.steps_per_year);
    const Product product(cfg.product, cfg.model);
    const Ensembles ens = simulate_all(cfg, grid);

    const MethodRun ref = run_reference(cfg, product, grid, ens);
    const double norm = error_normalizer(cfg, product, ref.price);
    const auto variants = cfg.variants.empty() ? default_variants(cfg.engine) : cfg.variants;

    std::vector<CompareRow> rows;
    for (const auto& v : variants) rows.push_back(error_row(run_dc(cfg, v.engine, v.label, product, grid, ens), ref, norm));
    if (cfg.compare_lsm) rows.push_back(error_row(run_lsm(cfg, product, grid, ens), ref, norm));

    write_errors_csv((fs::path(cfg.output_dir) / "errors.csv").string(), rows);
    write_timings_csv((fs::path(cfg.output_dir) / "timings.csv").string(), rows, ref);
    return rows;
}

std::string dump_moments(const RunConfig& cfg) {
    set_thread_count(cfg.threads);
    ensure_dir(cfg.output_dir);
    const auto grid = make_time_grid(cfg.simulation.maturity, cfg.simulation.steps_per_year);
    const Product product(cfg.product, cfg.model);
    const Domain domain = select_domain(cfg.model, product, grid.back() - grid.front(), cfg.engine.domain_k,
                                        cfg.engine.real_world_domain);
    const NodeLayout layout = make_layout(domain, cfg.engine, product);
    MomentMatrix m;
    m.gamma = step_moment_matrix(cfg.model, layout, grid[1] - grid[0], cfg.engine.cf);
    m.domain = domain;
    m.dt = grid[1] - grid[0];
    m.model_tag = model_name(cfg.model);
    const std::string path =
        (fs::path(cfg.output_dir) / ("moments_" + label_for(cfg.engine) + ".csv")).string();
    write_moment_matrix_csv(path, m);
    return path;
}

}  // namespace dce
