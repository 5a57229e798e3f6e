#pragma once

// Batch runs: configuration, method execution and artifact emission.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dce/engine.hpp"
#include "dce/exposure.hpp"
#include "dce/lsm.hpp"
#include "dce/models.hpp"
#include "dce/products.hpp"
#include "dce/reference.hpp"

namespace dce {

using Json = nlohmann::ordered_json;

struct SimulationConfig {
    std::size_t paths = 50000;
    double steps_per_year = 50.0;
    double maturity = 1.0;
    std::uint64_t seed_q = 1;
    std::uint64_t seed_p = 2;
    std::vector<Measure> measures{Measure::RiskNeutral, Measure::RealWorld};
};

/// One compare row: a Chebyshev variant.
struct DcVariant {
    std::string label;
    EngineConfig engine;
};

struct ReferenceConfig {
    CosBackwardConfig cos;
    std::size_t dc_degree = 512;  // reference for models without a COS pricer
};

struct RunConfig {
    std::string name;
    ModelSpec model = BlackScholesParams{};
    ProductSpec product = EuropeanSpec{};
    EngineConfig engine;
    SimulationConfig simulation;
    LsmConfig lsm;
    ReferenceConfig reference;
    std::vector<std::string> methods{"dc"};
    std::vector<DcVariant> variants;  // compare rows; empty: defaults from engine.N
    bool compare_lsm = true;
    std::string output_dir = "out";
    bool retain_matrix = false;
    std::size_t threads = 0;
    Json echo;  // the configuration tree after overrides
};

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
};

/// Built-in experiment presets: european_bs, barrier_bs, bermudan_merton, swaption_hw.
std::vector<std::string> preset_names();
Json preset(const std::string& name);

/// Applies DCE_<SECTION>__<KEY>=value variables; values parse as JSON when
/// possible and as strings otherwise.
void apply_env_overrides(Json& tree, const std::vector<std::string>& environment);
std::vector<std::string> current_environment();

/// Schema validation with field-level messages (ConfigurationError).
RunConfig parse_config(const Json& tree);
/// File path or preset name, then environment, then command-line overrides.
RunConfig load_config(const std::string& path_or_preset, const RunOverrides& overrides = {},
                      const std::vector<std::string>& environment = current_environment());

/// The reference valuer for a configuration: analytic BS for European BS,
/// COS backward induction for other equity products, high-degree Chebyshev
/// for the swaption.
struct ReferenceBuild {
    std::unique_ptr<PathValuer> valuer;
    std::shared_ptr<void> storage;
    double price = 0.0;
    double seconds = 0.0;
};
ReferenceBuild build_reference(const RunConfig& cfg, const Product& product, const std::vector<double>& grid);

/// Normalizer of the relative error metric: S0 for Bermudan equity options,
/// the reference price otherwise.
double error_normalizer(const RunConfig& cfg, const Product& product, double reference_price);

struct MethodRun {
    std::string method;  // dc, lsm, full_reeval or a compare label
    double price = 0.0;
    std::map<Measure, ExposureProfile> profiles;
    std::map<Measure, double> seconds;  // method cost per measure
    std::map<std::string, double> phases;
};

struct RunResult {
    Json summary;
    std::vector<MethodRun> runs;
};

/// Simulate, price, evaluate and write profile_*.csv, plot_*.dat,
/// summary.json and (with a reference method) errors.csv.
RunResult run(const RunConfig& cfg);

struct CompareRow {
    std::string label;
    double price = 0.0;
    double price_error = 0.0;
    double ee_price = 0.0;
    double pfe_price = 0.0;
    double ee_risk = 0.0;
    double pfe_risk = 0.0;
    double seconds_q = 0.0;
    double seconds_p = 0.0;
};

/// Scenario ensembles for every configured measure, with simulation seconds.
struct Ensembles {
    std::map<Measure, PathEnsemble> by_measure;
    std::map<Measure, double> seconds;
};
Ensembles simulate_all(const RunConfig& cfg, const std::vector<double>& grid);

// Single-method runners on shared ensembles. Seconds per measure include the
// method's offline phase and its evaluation on that measure's paths.
MethodRun run_dc(const RunConfig& cfg, const EngineConfig& engine, const std::string& label, const Product& product,
                 const std::vector<double>& grid, const Ensembles& ens);
MethodRun run_lsm(const RunConfig& cfg, const Product& product, const std::vector<double>& grid,
                  const Ensembles& ens);
MethodRun run_reference(const RunConfig& cfg, const Product& product, const std::vector<double>& grid,
                        const Ensembles& ens);
/// Price and max profile errors of `run` against `ref`, divided by `normalizer`.
CompareRow error_row(const MethodRun& run, const MethodRun& ref, double normalizer);

/// Chebyshev variants and LSM against the reference; writes errors.csv and
/// timings.csv.
std::vector<CompareRow> compare(const RunConfig& cfg);

/// Writes the step operator of the configured layout; returns the file path.
std::string dump_moments(const RunConfig& cfg);

}  // namespace dce
