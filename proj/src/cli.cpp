#include "levycouple/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "levycouple/config.hpp"
#include "levycouple/estimators.hpp"
#include "levycouple/io.hpp"
#include "levycouple/operators.hpp"
#include "levycouple/parallel.hpp"
#include "levycouple/rng.hpp"
#include "levycouple/simulate.hpp"

namespace levycouple::cli {

namespace {

using config::ExperimentConfig;
using nlohmann::json;

json vec_json(const Vec& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

std::string fmt(double v) { return io::format_double(v); }

int checked_paths(const ExperimentConfig& cfg) {
    if (cfg.n_paths > std::numeric_limits<int>::max())
        throw ConfigInvalid("n_paths is too large");
    return static_cast<int>(cfg.n_paths);
}

// The summary artifact sits next to the primary one: extension swapped to
// .json, or appended when the primary already ends in .json.
std::string summary_path(const std::string& path) {
    auto slash = path.find_last_of('/');
    auto dot = path.find_last_of('.');
    std::string swapped = (dot == std::string::npos ||
                           (slash != std::string::npos && dot < slash))
                              ? path + ".json"
                              : path.substr(0, dot) + ".json";
    return swapped == path ? path + ".summary.json" : swapped;
}

struct Emission {
    std::string primary;  // csv text, or full json text when format is json
    std::string summary;  // json text; empty means no side artifact
    std::string headline; // one-line description of what was computed
};

void emit(const ExperimentConfig& cfg, const Emission& artifact, std::ostream& out,
          std::ostream& err) {
    if (cfg.output.path.empty()) {
        out << artifact.primary;
        err << artifact.headline << "\n";
        return;
    }
    io::write_file_atomic(cfg.output.path, artifact.primary);
    std::string note = artifact.headline + "; wrote " + cfg.output.path;
    if (!artifact.summary.empty()) {
        std::string side = summary_path(cfg.output.path);
        io::write_file_atomic(side, artifact.summary);
        note += " and " + side;
    }
    out << note << "\n";
}

// csv format: primary = table, summary = side json. json format: one document
// holding the summary and the rows.
Emission tabulate(const ExperimentConfig& cfg, const std::vector<std::string>& header,
                  const std::vector<std::vector<std::string>>& rows, json summary,
                  json json_rows, const std::string& headline) {
    Emission artifact;
    artifact.headline = headline;
    if (cfg.output.format == "json") {
        json doc{{"summary", std::move(summary)}, {"rows", std::move(json_rows)}};
        artifact.primary = doc.dump(2) + "\n";
        return artifact;
    }
    artifact.primary = io::to_csv(header, rows);
    artifact.summary = summary.dump(2) + "\n";
    return artifact;
}

void warn_step(const simulate::SdeSpec& spec, std::ostream& err) {
    if (spec.step_warning())
        err << "warning: lipschitz * max_step exceeds 1, the Euler substeps may be unstable\n";
}

operators::JumpSystem build_system(const ExperimentConfig& cfg, const measures::LevyMeasure& nu) {
    const config::SchemeSpec& s = cfg.scheme;
    if (s.kind == "reflection") return operators::make_reflection_system(nu, s.eta);
    if (s.kind == "basic") return operators::make_refined_basic_system(nu, s.kappa);
    operators::Q0Spec q0;
    q0.half_distance = s.half_distance;
    if (!s.half_distance) q0.cut = s.cut;
    return operators::make_reflection_basic_system(nu, q0);
}

int run_verify(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    auto nu = config::build_measure(cfg);
    Vec x0 = config::to_vec(cfg.x0, cfg.dimension, "x0");
    Vec y0 = config::to_vec(cfg.y0, cfg.dimension, "y0");
    auto js = build_system(cfg, nu);
    auto kernel = operators::build_kernel(js, x0, y0);
    auto marginality = operators::verify_marginality(kernel, nu);
    auto symmetry = operators::verify_symmetry_condition(js, x0, y0);

    json rows = json::array();
    for (const auto& row : kernel.rows)
        rows.push_back(json{{"label", row.label},
                            {"mass", row.mass},
                            {"u", vec_json(row.u)},
                            {"v", vec_json(row.v)}});
    json report{{"marginality_defect", marginality.max_defect},
                {"marginality_ok", marginality.ok},
                {"symmetry_defect", symmetry.max_defect},
                {"symmetry_ok", symmetry.ok},
                {"rows", rows},
                {"config_hash", config::config_hash(cfg)}};

    Emission artifact;
    artifact.primary = report.dump(2) + "\n";
    artifact.headline = "verify: marginality defect " + fmt(marginality.max_defect) +
                        ", symmetry defect " + fmt(symmetry.max_defect);
    emit(cfg, artifact, out, err);
    return 0;
}

int run_simulate(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    auto spec = config::build_sde(cfg);
    warn_step(spec, err);
    auto coupling = config::build_coupling(cfg);
    Vec x0 = config::to_vec(cfg.x0, cfg.dimension, "x0");
    Vec y0 = config::to_vec(cfg.y0, cfg.dimension, "y0");
    int n = checked_paths(cfg);

    std::vector<simulate::PathPair> paths(static_cast<std::size_t>(n));
    parallel::parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
        auto rng = RngStream::for_path(cfg.seed, k);
        paths[k] = simulate::simulate_pair(spec, coupling, x0, y0, rng);
    });

    int d = cfg.dimension;
    std::vector<std::string> header{"path", "t"};
    for (int i = 1; i <= d; ++i) header.push_back("x_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) header.push_back("y_" + std::to_string(i));
    header.push_back("event_type");

    std::vector<std::vector<std::string>> rows;
    json json_rows = json::array();
    long coalesced = 0;
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const auto& p = paths[k];
        if (p.coalesced) ++coalesced;
        if (cfg.output.format == "json") {
            json records = json::array();
            for (std::size_t i = 0; i < p.times.size(); ++i)
                records.push_back(json{{"t", p.times[i]},
                                       {"x", vec_json(p.xs[i])},
                                       {"y", vec_json(p.ys[i])},
                                       {"event", simulate::event_name(p.events[i])}});
            json_rows.push_back(json{{"path", k},
                                     {"coalesced", p.coalesced},
                                     {"tau", p.coalesced ? json(p.tau) : json()},
                                     {"records", std::move(records)}});
            continue;
        }
        for (std::size_t i = 0; i < p.times.size(); ++i) {
            std::vector<std::string> row{std::to_string(k), fmt(p.times[i])};
            for (int j = 0; j < d; ++j) row.push_back(fmt(p.xs[i][j]));
            for (int j = 0; j < d; ++j) row.push_back(fmt(p.ys[i][j]));
            row.push_back(simulate::event_name(p.events[i]));
            rows.push_back(std::move(row));
        }
    }

    json summary{{"command", "simulate"},
                 {"scheme", cfg.scheme.kind},
                 {"n_paths", n},
                 {"coalesced", coalesced},
                 {"seed", cfg.seed},
                 {"config_hash", config::config_hash(cfg)}};
    auto artifact = tabulate(cfg, header, rows, std::move(summary), std::move(json_rows),
                             "simulate: " + std::to_string(n) + " paths, " +
                                 std::to_string(coalesced) + " coalesced");
    emit(cfg, artifact, out, err);
    return 0;
}

int run_tail(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    auto spec = config::build_sde(cfg);
    warn_step(spec, err);
    auto coupling = config::build_coupling(cfg);
    Vec x0 = config::to_vec(cfg.x0, cfg.dimension, "x0");
    Vec y0 = config::to_vec(cfg.y0, cfg.dimension, "y0");
    auto points = estimators::coupling_time_tail(spec, coupling, x0, y0, cfg.t_grid,
                                                 checked_paths(cfg), cfg.seed);

    std::vector<std::vector<std::string>> rows;
    json json_rows = json::array();
    for (const auto& pt : points) {
        rows.push_back({fmt(pt.t), fmt(pt.estimate.value), fmt(pt.estimate.std_error)});
        json_rows.push_back(json{{"t", pt.t},
                                 {"estimate", pt.estimate.value},
                                 {"std_error", pt.estimate.std_error}});
    }
    json summary{{"command", "tail"},
                 {"scheme", cfg.scheme.kind},
                 {"n_paths", cfg.n_paths},
                 {"seed", cfg.seed},
                 {"config_hash", config::config_hash(cfg)}};
    auto artifact = tabulate(cfg, {"t", "estimate", "std_error"}, rows, std::move(summary),
                             std::move(json_rows),
                             "tail: " + std::to_string(points.size()) + " grid points");
    emit(cfg, artifact, out, err);
    return 0;
}

int run_tv(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    auto spec = config::build_sde(cfg);
    warn_step(spec, err);
    auto coupling = config::build_coupling(cfg);
    Vec x0 = config::to_vec(cfg.x0, cfg.dimension, "x0");
    Vec y0 = config::to_vec(cfg.y0, cfg.dimension, "y0");
    auto bound = estimators::tv_bound(spec, coupling, x0, y0, cfg.horizon,
                                      checked_paths(cfg), cfg.seed);

    std::vector<std::vector<std::string>> rows{{fmt(cfg.horizon), fmt(bound.upper.value),
                                                fmt(bound.upper.std_error),
                                                fmt(bound.lower.value),
                                                fmt(bound.lower.std_error)}};
    json json_rows = json::array();
    json_rows.push_back(json{{"t", cfg.horizon},
                             {"upper", bound.upper.value},
                             {"upper_std_error", bound.upper.std_error},
                             {"lower", bound.lower.value},
                             {"lower_std_error", bound.lower.std_error}});
    json summary{{"command", "tv"},
                 {"upper", bound.upper.value},
                 {"lower", bound.lower.value},
                 {"n_paths", cfg.n_paths},
                 {"seed", cfg.seed},
                 {"config_hash", config::config_hash(cfg)}};
    auto artifact = tabulate(
        cfg, {"t", "upper", "upper_std_error", "lower", "lower_std_error"}, rows,
        std::move(summary), std::move(json_rows),
        "tv: upper " + fmt(bound.upper.value) + ", lower " + fmt(bound.lower.value));
    emit(cfg, artifact, out, err);
    return 0;
}

int run_regularity(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    auto spec = config::build_sde(cfg);
    warn_step(spec, err);
    auto coupling = config::build_coupling(cfg);
    Vec x0 = config::to_vec(cfg.x0, cfg.dimension, "x0");
    auto f = config::build_observable(cfg);
    auto report = estimators::regularity_ratio(spec, coupling, f, x0, cfg.delta_grid,
                                               cfg.t_grid, checked_paths(cfg), cfg.seed);

    std::vector<std::vector<std::string>> rows;
    json json_rows = json::array();
    for (const auto& cell : report.cells) {
        rows.push_back({fmt(cell.delta), fmt(cell.t), fmt(cell.ratio), fmt(cell.std_error),
                        fmt(cell.tail_ceiling), fmt(cell.tail_ceiling_se)});
        json_rows.push_back(json{{"delta", cell.delta},
                                 {"t", cell.t},
                                 {"ratio", cell.ratio},
                                 {"std_error", cell.std_error},
                                 {"tail_ceiling", cell.tail_ceiling},
                                 {"tail_ceiling_std_error", cell.tail_ceiling_se}});
    }
    json summary{{"command", "regularity"},
                 {"c_hat", report.c_hat},
                 {"n_paths", cfg.n_paths},
                 {"seed", cfg.seed},
                 {"config_hash", config::config_hash(cfg)}};
    auto artifact = tabulate(
        cfg,
        {"delta", "t", "ratio", "std_error", "tail_ceiling", "tail_ceiling_std_error"},
        rows, std::move(summary), std::move(json_rows), "regularity: c_hat " + fmt(report.c_hat));
    emit(cfg, artifact, out, err);
    return 0;
}

int run_driftcheck(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    auto nu = config::build_measure(cfg);
    auto b = config::build_drift(cfg);
    auto report = estimators::drift_inequality_check(config::scheme_kind(cfg), nu, b,
                                                     cfg.delta_grid, cfg.truncation);

    std::vector<std::vector<std::string>> rows;
    json json_rows = json::array();
    for (const auto& row : report.table) {
        rows.push_back({fmt(row.delta), fmt(row.value), row.contracting ? "true" : "false"});
        json_rows.push_back(json{{"delta", row.delta},
                                 {"value", row.value},
                                 {"contracting", row.contracting}});
    }
    json summary{{"command", "driftcheck"},
                 {"epsilon0_hat", report.epsilon0_hat},
                 {"c0_hat", report.c0_hat},
                 {"hypothesis_bound", report.hypothesis_bound},
                 {"hypothesis_r", report.hypothesis_r},
                 {"hypothesis_value", report.hypothesis_value},
                 {"config_hash", config::config_hash(cfg)}};
    auto artifact = tabulate(cfg, {"delta", "value", "contracting"}, rows, std::move(summary),
                             std::move(json_rows),
                             "driftcheck: epsilon0 " + fmt(report.epsilon0_hat) + ", c0 " +
                                 fmt(report.c0_hat));
    emit(cfg, artifact, out, err);
    return 0;
}

int run_compare(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    auto nu = config::build_measure(cfg);
    auto f = config::build_test_function(cfg);
    std::vector<std::pair<Vec, Vec>> pairs;
    if (cfg.compare.pairs.empty()) {
        pairs.emplace_back(config::to_vec(cfg.x0, cfg.dimension, "x0"),
                           config::to_vec(cfg.y0, cfg.dimension, "y0"));
    } else {
        for (const auto& [x, y] : cfg.compare.pairs)
            pairs.emplace_back(config::to_vec(x, cfg.dimension, "compare.pairs x"),
                               config::to_vec(y, cfg.dimension, "compare.pairs y"));
    }
    auto comparison_case = cfg.compare.comparison_case == "finite"
                               ? operators::ComparisonCase::FiniteRange
                               : operators::ComparisonCase::InfiniteRange;
    auto rows_out = operators::compare_operators(comparison_case, nu, f, pairs,
                                                 cfg.scheme.kappa, cfg.truncation);

    int d = cfg.dimension;
    std::vector<std::string> header;
    for (int i = 1; i <= d; ++i) header.push_back("x_" + std::to_string(i));
    for (int i = 1; i <= d; ++i) header.push_back("y_" + std::to_string(i));
    header.insert(header.end(), {"reflection", "combined", "basic"});

    double max_gap = -std::numeric_limits<double>::infinity();
    std::vector<std::vector<std::string>> rows;
    json json_rows = json::array();
    for (const auto& row : rows_out) {
        max_gap = std::max(max_gap, row.combined - row.reflection);
        std::vector<std::string> cells;
        for (int j = 0; j < d; ++j) cells.push_back(fmt(row.x[j]));
        for (int j = 0; j < d; ++j) cells.push_back(fmt(row.y[j]));
        cells.insert(cells.end(), {fmt(row.reflection), fmt(row.combined), fmt(row.basic)});
        rows.push_back(std::move(cells));
        json_rows.push_back(json{{"x", vec_json(row.x)},
                                 {"y", vec_json(row.y)},
                                 {"reflection", row.reflection},
                                 {"combined", row.combined},
                                 {"basic", row.basic}});
    }
    json summary{{"command", "compare"},
                 {"case", cfg.compare.comparison_case},
                 {"max_combined_minus_reflection", max_gap},
                 {"config_hash", config::config_hash(cfg)}};
    auto artifact = tabulate(cfg, header, rows, std::move(summary), std::move(json_rows),
                             "compare: " + std::to_string(rows_out.size()) +
                                 " pairs, max combined-reflection gap " + fmt(max_gap));
    emit(cfg, artifact, out, err);
    return 0;
}

int run_print_config(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
    Emission artifact;
    artifact.primary = config::serialize_config(cfg);
    artifact.headline = "print-config: FNV hash " + std::to_string(config::config_hash(cfg));
    emit(cfg, artifact, out, err);
    return 0;
}

} // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"coupling constructions for additive pure-jump SDEs"};
    app.require_subcommand(1);

    std::string config_path, scheme, out_path, format;
    long paths = 0;
    std::uint64_t seed = 0;

    const std::vector<std::pair<const char*, const char*>> commands{
        {"verify", "build the coupling kernel and report marginality/symmetry defects"},
        {"simulate", "emit coupled trajectories"},
        {"tail", "estimate the coupling-time tail over the t grid"},
        {"tv", "estimate total-variation bounds at the horizon"},
        {"regularity", "estimate the profile-normalized regularity ratio"},
        {"driftcheck", "evaluate the contraction inequality on the delta grid"},
        {"compare", "evaluate the three operators on start pairs"},
        {"print-config", "print the fully resolved configuration"}};
    for (const auto& [name, description] : commands) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "path to a JSON experiment config");
        sub->add_option("--scheme", scheme, "coupling scheme: reflection|basic|refbasic");
        sub->add_option("--paths", paths, "number of Monte Carlo paths");
        sub->add_option("--seed", seed, "master seed for the per-path streams");
        sub->add_option("--out", out_path, "output path (empty writes to stdout)");
        sub->add_option("--format", format, "output format: csv|json");
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        ExperimentConfig cfg;
        if (sub->count("--config") > 0) cfg = config::load_config(config_path);
        if (sub->count("--scheme") > 0) {
            if (scheme != "reflection" && scheme != "basic" && scheme != "refbasic")
                throw ConfigInvalid("scheme must be one of reflection, basic, refbasic");
            cfg.scheme.kind = scheme;
        }
        if (sub->count("--paths") > 0) {
            if (paths < 1) throw ConfigInvalid("paths must be at least 1");
            cfg.n_paths = paths;
        }
        if (sub->count("--seed") > 0) cfg.seed = seed;
        if (sub->count("--out") > 0) cfg.output.path = out_path;
        if (sub->count("--format") > 0) {
            if (format != "csv" && format != "json")
                throw ConfigInvalid("format must be one of csv, json");
            cfg.output.format = format;
        }
        if (cfg.workers > 0) {
            std::string count = std::to_string(cfg.workers);
            ::setenv("LEVY_COUPLE_THREADS", count.c_str(), 0);
        }

        const std::string name = sub->get_name();
        if (name == "verify") return run_verify(cfg, out, err);
        if (name == "simulate") return run_simulate(cfg, out, err);
        if (name == "tail") return run_tail(cfg, out, err);
        if (name == "tv") return run_tv(cfg, out, err);
        if (name == "regularity") return run_regularity(cfg, out, err);
        if (name == "driftcheck") return run_driftcheck(cfg, out, err);
        if (name == "compare") return run_compare(cfg, out, err);
        return run_print_config(cfg, out, err);
    } catch (const ConfigInvalid& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const io::IoError& e) {
        err << "io error: " << e.what() << "\n";
        return 1;
    } catch (const NonAtomicBase& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NonSymmetricMeasure& e) {
        err << "config error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        err << "numeric error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace levycouple::cli
