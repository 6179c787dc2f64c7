#include "levycouple/config.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

#include "json.hpp"
#include "levycouple/io.hpp"

namespace levycouple::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigInvalid(msg); }

std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void require_known_keys(const json& obj, const std::string& path,
                        std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) fail((path.empty() ? std::string("config") : path) + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed)
            if (it.key() == key) known = true;
        if (!known) fail("unknown config key " + joined(path, it.key()));
    }
}

double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(joined(path, key) + " must be a number");
    return v.get<double>();
}

long get_integer(const json& obj, const std::string& path, const char* key, long fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(joined(path, key) + " must be an integer");
    return v.get<long>();
}

std::uint64_t get_seed(const json& obj, const std::string& path, const char* key,
                       std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && v.get<double>() < 0))
        fail(joined(path, key) + " must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(joined(path, key) + " must be a boolean");
    return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(joined(path, key) + " must be a string");
    return v.get<std::string>();
}

std::vector<double> get_number_list(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where + " must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& item : v) {
        if (!item.is_number()) fail(where + " must be an array of numbers");
        out.push_back(item.get<double>());
    }
    return out;
}

std::vector<std::pair<double, double>> get_knots(const json& obj, const std::string& path,
                                                 const char* key) {
    std::vector<std::pair<double, double>> out;
    if (!obj.contains(key)) return out;
    const std::string where = joined(path, key);
    const json& v = obj.at(key);
    if (!v.is_array()) fail(where + " must be an array of [x, y] pairs");
    for (const json& item : v) {
        auto pair = get_number_list(item, where + " entries");
        if (pair.size() != 2) fail(where + " entries must be [x, y] pairs");
        out.emplace_back(pair[0], pair[1]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

MeasureSpec parse_measure(const json& obj) {
    MeasureSpec spec;
    require_known_keys(obj, "measure", {"kind", "alpha", "c", "atoms", "profile"});
    spec.kind = get_string(obj, "measure", "kind", spec.kind);
    spec.alpha = get_number(obj, "measure", "alpha", spec.alpha);
    spec.c = get_number(obj, "measure", "c", spec.c);
    if (obj.contains("atoms")) {
        const json& atoms = obj.at("atoms");
        if (!atoms.is_array()) fail("measure.atoms must be an array");
        for (const json& atom : atoms) {
            require_known_keys(atom, "measure.atoms entries", {"location", "mass"});
            if (!atom.contains("location") || !atom.contains("mass"))
                fail("measure.atoms entries need location and mass");
            spec.atoms.emplace_back(
                get_number_list(atom.at("location"), "measure.atoms location"),
                get_number(atom, "measure.atoms entries", "mass", 0.0));
        }
    }
    spec.profile = get_knots(obj, "measure", "profile");

    if (spec.kind == "discrete") {
        if (spec.atoms.empty()) fail("measure.atoms is required for a discrete measure");
    } else if (spec.kind == "radial") {
        if (spec.profile.empty()) fail("measure.profile is required for a radial measure");
    } else if (spec.kind != "stable") {
        fail("measure.kind must be one of stable, discrete, radial");
    }
    return spec;
}

DriftSpec parse_drift(const json& obj) {
    DriftSpec spec;
    require_known_keys(obj, "drift", {"kind", "k", "points"});
    spec.kind = get_string(obj, "drift", "kind", spec.kind);
    spec.k = get_number(obj, "drift", "k", spec.k);
    spec.points = get_knots(obj, "drift", "points");
    if (spec.kind == "table") {
        if (spec.points.empty()) fail("drift.points is required for a table drift");
    } else if (spec.kind != "zero" && spec.kind != "linear") {
        fail("drift.kind must be one of zero, linear, table");
    }
    return spec;
}

SchemeSpec parse_scheme(const json& obj) {
    SchemeSpec spec;
    require_known_keys(obj, "scheme",
                       {"kind", "eta", "kappa", "cut", "half_distance", "meet_threshold"});
    spec.kind = get_string(obj, "scheme", "kind", spec.kind);
    spec.eta = get_number(obj, "scheme", "eta", spec.eta);
    spec.kappa = get_number(obj, "scheme", "kappa", spec.kappa);
    spec.cut = get_number(obj, "scheme", "cut", spec.cut);
    spec.half_distance = get_bool(obj, "scheme", "half_distance", spec.half_distance);
    spec.meet_threshold = get_number(obj, "scheme", "meet_threshold", spec.meet_threshold);
    if (spec.kind != "reflection" && spec.kind != "basic" && spec.kind != "refbasic")
        fail("scheme.kind must be one of reflection, basic, refbasic");
    return spec;
}

json pairs_to_json(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
    json out = json::array();
    for (const auto& [x, y] : pairs) out.push_back(json{{"x", x}, {"y", y}});
    return out;
}

CompareSpec parse_compare(const json& obj) {
    CompareSpec spec;
    require_known_keys(obj, "compare", {"case", "test_function", "parameter", "pairs"});
    spec.comparison_case = get_string(obj, "compare", "case", spec.comparison_case);
    spec.test_function = get_string(obj, "compare", "test_function", spec.test_function);
    spec.parameter = get_number(obj, "compare", "parameter", spec.parameter);
    if (obj.contains("pairs")) {
        const json& pairs = obj.at("pairs");
        if (!pairs.is_array()) fail("compare.pairs must be an array");
        for (const json& pair : pairs) {
            require_known_keys(pair, "compare.pairs entries", {"x", "y"});
            if (!pair.contains("x") || !pair.contains("y"))
                fail("compare.pairs entries need x and y");
            spec.pairs.emplace_back(get_number_list(pair.at("x"), "compare.pairs x"),
                                    get_number_list(pair.at("y"), "compare.pairs y"));
        }
    }
    if (spec.comparison_case != "infinite" && spec.comparison_case != "finite")
        fail("compare.case must be one of infinite, finite");
    if (spec.test_function != "identity" && spec.test_function != "capped" &&
        spec.test_function != "exponential")
        fail("compare.test_function must be one of identity, capped, exponential");
    return spec;
}

double interpolate(const std::vector<std::pair<double, double>>& knots, double x) {
    if (x <= knots.front().first) return knots.front().second;
    if (x >= knots.back().first) return knots.back().second;
    auto hi = std::upper_bound(knots.begin(), knots.end(),
                               std::make_pair(x, std::numeric_limits<double>::infinity()));
    auto lo = hi - 1;
    double span = hi->first - lo->first;
    if (span <= 0.0) return lo->second;
    double w = (x - lo->first) / span;
    return lo->second + w * (hi->second - lo->second);
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(std::string("config is not valid JSON: ") + e.what());
    }
    require_known_keys(doc, "",
                       {"dimension", "measure", "drift", "scheme", "truncation", "simulation",
                        "grids", "n_paths", "seed", "x0", "y0", "observable", "compare",
                        "output", "workers"});

    ExperimentConfig cfg;
    cfg.dimension = static_cast<int>(get_integer(doc, "", "dimension", cfg.dimension));
    if (cfg.dimension < 1) fail("dimension must be at least 1");
    if (doc.contains("measure")) cfg.measure = parse_measure(doc.at("measure"));
    if (doc.contains("drift")) cfg.drift = parse_drift(doc.at("drift"));
    if (doc.contains("scheme")) cfg.scheme = parse_scheme(doc.at("scheme"));

    if (doc.contains("truncation")) {
        const json& t = doc.at("truncation");
        require_known_keys(t, "truncation", {"epsilon", "quad_points", "mc_points", "mc_seed"});
        cfg.truncation.epsilon = get_number(t, "truncation", "epsilon", cfg.truncation.epsilon);
        cfg.truncation.quad_points = static_cast<int>(
            get_integer(t, "truncation", "quad_points", cfg.truncation.quad_points));
        cfg.truncation.mc_points = static_cast<int>(
            get_integer(t, "truncation", "mc_points", cfg.truncation.mc_points));
        cfg.truncation.mc_seed = get_seed(t, "truncation", "mc_seed", cfg.truncation.mc_seed);
    }
    if (doc.contains("simulation")) {
        const json& s = doc.at("simulation");
        require_known_keys(
            s, "simulation",
            {"max_step", "horizon", "explosion_bound", "record_drift", "lipschitz"});
        cfg.max_step = get_number(s, "simulation", "max_step", cfg.max_step);
        cfg.horizon = get_number(s, "simulation", "horizon", cfg.horizon);
        cfg.explosion_bound =
            get_number(s, "simulation", "explosion_bound", cfg.explosion_bound);
        cfg.record_drift = get_bool(s, "simulation", "record_drift", cfg.record_drift);
        cfg.lipschitz = get_number(s, "simulation", "lipschitz", cfg.lipschitz);
    }
    if (doc.contains("grids")) {
        const json& g = doc.at("grids");
        require_known_keys(g, "grids", {"t", "delta"});
        if (g.contains("t")) cfg.t_grid = get_number_list(g.at("t"), "grids.t");
        if (g.contains("delta")) cfg.delta_grid = get_number_list(g.at("delta"), "grids.delta");
    }
    cfg.n_paths = get_integer(doc, "", "n_paths", cfg.n_paths);
    if (cfg.n_paths < 1) fail("n_paths must be at least 1");
    cfg.seed = get_seed(doc, "", "seed", cfg.seed);
    if (doc.contains("x0")) cfg.x0 = get_number_list(doc.at("x0"), "x0");
    if (doc.contains("y0")) cfg.y0 = get_number_list(doc.at("y0"), "y0");
    if (doc.contains("observable")) {
        const json& o = doc.at("observable");
        require_known_keys(o, "observable", {"kind", "scale"});
        cfg.observable.kind = get_string(o, "observable", "kind", cfg.observable.kind);
        cfg.observable.scale = get_number(o, "observable", "scale", cfg.observable.scale);
        if (cfg.observable.kind != "tanh" && cfg.observable.kind != "capped")
            fail("observable.kind must be one of tanh, capped");
    }
    if (doc.contains("compare")) cfg.compare = parse_compare(doc.at("compare"));
    if (doc.contains("output")) {
        const json& o = doc.at("output");
        require_known_keys(o, "output", {"path", "format"});
        cfg.output.path = get_string(o, "output", "path", cfg.output.path);
        cfg.output.format = get_string(o, "output", "format", cfg.output.format);
        if (cfg.output.format != "csv" && cfg.output.format != "json")
            fail("output.format must be one of csv, json");
    }
    cfg.workers = static_cast<int>(get_integer(doc, "", "workers", cfg.workers));
    if (cfg.workers < 0) fail("workers must be nonnegative");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config(io::read_file(path));
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json atoms = json::array();
    for (const auto& [loc, mass] : cfg.measure.atoms)
        atoms.push_back(json{{"location", loc}, {"mass", mass}});
    json doc{
        {"dimension", cfg.dimension},
        {"measure",
         {{"kind", cfg.measure.kind},
          {"alpha", cfg.measure.alpha},
          {"c", cfg.measure.c},
          {"atoms", atoms},
          {"profile", cfg.measure.profile}}},
        {"drift",
         {{"kind", cfg.drift.kind}, {"k", cfg.drift.k}, {"points", cfg.drift.points}}},
        {"scheme",
         {{"kind", cfg.scheme.kind},
          {"eta", cfg.scheme.eta},
          {"kappa", cfg.scheme.kappa},
          {"cut", cfg.scheme.cut},
          {"half_distance", cfg.scheme.half_distance},
          {"meet_threshold", cfg.scheme.meet_threshold}}},
        {"truncation",
         {{"epsilon", cfg.truncation.epsilon},
          {"quad_points", cfg.truncation.quad_points},
          {"mc_points", cfg.truncation.mc_points},
          {"mc_seed", cfg.truncation.mc_seed}}},
        {"simulation",
         {{"max_step", cfg.max_step},
          {"horizon", cfg.horizon},
          {"explosion_bound", cfg.explosion_bound},
          {"record_drift", cfg.record_drift},
          {"lipschitz", cfg.lipschitz}}},
        {"grids", {{"t", cfg.t_grid}, {"delta", cfg.delta_grid}}},
        {"n_paths", cfg.n_paths},
        {"seed", cfg.seed},
        {"x0", cfg.x0},
        {"y0", cfg.y0},
        {"observable", {{"kind", cfg.observable.kind}, {"scale", cfg.observable.scale}}},
        {"compare",
         {{"case", cfg.compare.comparison_case},
          {"test_function", cfg.compare.test_function},
          {"parameter", cfg.compare.parameter},
          {"pairs", pairs_to_json(cfg.compare.pairs)}}},
        {"output", {{"path", cfg.output.path}, {"format", cfg.output.format}}},
        {"workers", cfg.workers},
    };
    return doc.dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // Output location and worker count are plumbing, not experiment identity:
    // rerunning the same experiment into another file keeps its hash.
    ExperimentConfig canon = cfg;
    canon.output = {};
    canon.workers = 0;
    return estimators::fnv64(serialize_config(canon));
}

measures::LevyMeasure build_measure(const ExperimentConfig& cfg) {
    const MeasureSpec& m = cfg.measure;
    if (m.kind == "stable") return measures::LevyMeasure::stable(cfg.dimension, m.alpha, m.c);
    if (m.kind == "discrete") {
        std::vector<measures::Atom> atoms;
        atoms.reserve(m.atoms.size());
        for (const auto& [loc, mass] : m.atoms)
            atoms.push_back({to_vec(loc, cfg.dimension, "measure.atoms location"), mass});
        return measures::LevyMeasure::discrete(cfg.dimension, std::move(atoms));
    }
    auto knots = m.profile;
    for (const auto& [r, q] : knots) {
        if (r <= 0.0) fail("measure.profile radii must be positive");
        if (q < 0.0) fail("measure.profile values must be nonnegative");
    }
    double range = knots.back().first;
    auto q = [knots](double r) { return interpolate(knots, r); };
    return measures::LevyMeasure::radial(cfg.dimension, q, range);
}

operators::DriftFn build_drift(const ExperimentConfig& cfg) {
    const DriftSpec& d = cfg.drift;
    if (d.kind == "zero") return {};
    if (d.kind == "linear") {
        double k = d.k;
        return [k](const Vec& x) { return Vec(k * x); };
    }
    if (cfg.dimension != 1) fail("drift.kind table is only available in dimension 1");
    auto points = d.points;
    return [points](const Vec& x) { return Vec(Vec::Constant(1, interpolate(points, x[0]))); };
}

simulate::SdeSpec build_sde(const ExperimentConfig& cfg) {
    simulate::SdeSpec spec(cfg.dimension, build_measure(cfg));
    spec.drift = build_drift(cfg);
    spec.truncation = cfg.truncation;
    spec.max_step = cfg.max_step;
    spec.horizon = cfg.horizon;
    spec.explosion_bound = cfg.explosion_bound;
    spec.record_drift = cfg.record_drift;
    spec.lipschitz = cfg.lipschitz;
    spec.validate();
    return spec;
}

simulate::CouplingSpec build_coupling(const ExperimentConfig& cfg) {
    const SchemeSpec& s = cfg.scheme;
    simulate::CouplingSpec coupling;
    if (s.kind == "reflection") {
        coupling = simulate::CouplingSpec::reflection(s.eta);
    } else if (s.kind == "basic") {
        coupling = simulate::CouplingSpec::refined_basic(s.kappa);
    } else {
        operators::Q0Spec q0;
        q0.half_distance = s.half_distance;
        if (!s.half_distance) q0.cut = s.cut;
        coupling = simulate::CouplingSpec::reflection_basic(q0);
    }
    if (s.meet_threshold != -2.0) coupling.meet_threshold = s.meet_threshold;
    coupling.validate();
    return coupling;
}

simulate::Scheme scheme_kind(const ExperimentConfig& cfg) {
    if (cfg.scheme.kind == "reflection") return simulate::Scheme::Reflection;
    if (cfg.scheme.kind == "basic") return simulate::Scheme::RefinedBasic;
    return simulate::Scheme::ReflectionBasic;
}

estimators::BoundedObservable build_observable(const ExperimentConfig& cfg) {
    double scale = cfg.observable.scale;
    if (cfg.observable.kind == "tanh")
        return {[scale](const Vec& x) { return std::tanh(scale * x[0]); }, 1.0};
    return {[scale](const Vec& x) { return std::clamp(scale * x[0], -1.0, 1.0); }, 1.0};
}

operators::TestFunction build_test_function(const ExperimentConfig& cfg) {
    const CompareSpec& c = cfg.compare;
    if (c.test_function == "identity") return operators::TestFunction::identity();
    if (c.test_function == "capped") return operators::TestFunction::capped(c.parameter);
    return operators::TestFunction::exponential(c.parameter);
}

Vec to_vec(const std::vector<double>& values, int dimension, const std::string& name) {
    if (static_cast<int>(values.size()) != dimension)
        fail(name + " must have exactly " + std::to_string(dimension) + " entries");
    Vec out(dimension);
    for (int i = 0; i < dimension; ++i) out[i] = values[static_cast<std::size_t>(i)];
    return out;
}

} // namespace levycouple::config
