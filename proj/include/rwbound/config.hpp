#pragma once

// Job configuration: a JSON document with four sections.
//
//   model       {"walk": SEQ} or {"risk": {"p": .., "claims": SEQ, "interarrivals": SEQ}}
//   constants   walk: h, c, b?, delta?, stated?{a, epsilon, d1, d2}
//               risk: gamma, kappa, beta?, delta?, stated?{alpha, epsilon, nu1, nu2}
//   simulation  trials?, horizon?, seed?, confidence_level?, time_horizon?, grid?
//   output      format? ("text" | "json-lines" | "csv"), plot?
//
// SEQ is {"periodic": {"preperiod": [LAW..], "cycle": [LAW..]}, "horizon"?},
// {"iid": LAW, "horizon"?} or {"family": NAME, "params"?, "head"?, "horizon"}.
// LAW is a single-key object: degenerate, uniform, exponential, erlang_two,
// discrete, mixture, difference or harmonic_erlang_claim.
//
// "stated" values replace derived constants in the bound, which is only
// sound in the conservative direction; the loader cannot check that, the
// conditions command does.

#include "rwbound/families.hpp"
#include "rwbound/mc.hpp"
#include "rwbound/riskmodel.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace rwbound {

using json = nlohmann::json;

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct WalkModel {
    // Placeholder so configs can be default-constructed before parsing.
    SequenceSpec sequence = SequenceSpec::iid(Distribution::degenerate(-1.0));
    bool operator==(const WalkModel&) const = default;
};

struct RiskModel {
    RiskModelSpec spec;
    bool operator==(const RiskModel& o) const {
        return spec.p == o.spec.p && spec.claims == o.spec.claims && spec.interarrivals == o.spec.interarrivals;
    }
};

// Walk names are used for both model kinds: h = gamma, c = kappa, b = beta,
// a = alpha, d1 = nu1, d2 = nu2 for risk configs.
struct StatedConstants {
    std::optional<double> a;
    std::optional<double> epsilon;
    std::optional<double> d1;
    std::optional<double> d2;
    bool operator==(const StatedConstants&) const = default;
    bool empty() const { return !a && !epsilon && !d1 && !d2; }
};

struct ConstantsSection {
    double h = 0.0;
    double c = 0.0;
    std::optional<std::size_t> b;
    std::optional<double> delta;
    StatedConstants stated;
    bool operator==(const ConstantsSection&) const = default;
};

struct SimulationSection {
    SimulationPlan plan;
    std::vector<double> grid;
    bool operator==(const SimulationSection& o) const {
        return plan.trials == o.plan.trials && plan.horizon == o.plan.horizon && plan.seed == o.plan.seed &&
               plan.confidence_level == o.plan.confidence_level && plan.time_horizon == o.plan.time_horizon &&
               grid == o.grid;
    }
};

enum class OutputFormat { text, json_lines, csv };

struct OutputSection {
    OutputFormat format = OutputFormat::text;
    std::optional<std::string> plot;
    bool operator==(const OutputSection&) const = default;
};

struct JobConfig {
    std::variant<WalkModel, RiskModel> model;
    ConstantsSection constants;
    SimulationSection simulation;
    OutputSection output;

    bool is_risk() const { return std::holds_alternative<RiskModel>(model); }
    bool operator==(const JobConfig&) const = default;
};

inline OutputFormat parse_format(const std::string& s) {
    if (s == "text") return OutputFormat::text;
    if (s == "json-lines") return OutputFormat::json_lines;
    if (s == "csv") return OutputFormat::csv;
    throw config_error("unknown output format '" + s + "' (expected text, json-lines or csv)");
}

inline std::string format_name(OutputFormat f) {
    switch (f) {
    case OutputFormat::text: return "text";
    case OutputFormat::json_lines: return "json-lines";
    case OutputFormat::csv: return "csv";
    }
    return "text";
}

// "a:b:step", inclusive of b up to rounding.
inline std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw config_error("grid '" + text + "': '" + item + "' is not a number");
        }
    }
    if (parts.size() != 3) throw config_error("grid '" + text + "' must have the form a:b:step");
    const double a = parts[0], b = parts[1], step = parts[2];
    if (!(step > 0.0) || !(b >= a)) throw config_error("grid '" + text + "' needs step > 0 and b >= a");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / step * (1.0 + 1e-12))) + 1;
    if (count > 1000000) throw config_error("grid '" + text + "' has too many points");
    std::vector<double> grid;
    for (std::size_t i = 0; i < count; ++i) grid.push_back(a + static_cast<double>(i) * step);
    return grid;
}

namespace detail {

// Walks a JSON tree keeping the dotted path for diagnostics.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const json& raw() const { return j_; }
    const std::string& path() const { return path_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw config_error("config error at " + (path_.empty() ? std::string("<root>") : path_) + ": " + what);
    }

    void expect_object() const {
        if (!j_.is_object()) fail("expected an object");
    }
    void expect_array() const {
        if (!j_.is_array()) fail("expected an array");
    }

    bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }

    Node at(const std::string& key) const {
        expect_object();
        if (!j_.contains(key)) fail("missing field '" + key + "'");
        return Node(j_.at(key), join(key));
    }
    Node at(std::size_t i) const { return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]"); }
    std::size_t size() const { return j_.size(); }

    void allow_only(std::initializer_list<const char*> keys) const {
        expect_object();
        for (const auto& [k, v] : j_.items()) {
            bool ok = false;
            for (const char* allowed : keys) ok = ok || k == allowed;
            if (!ok) Node(v, join(k)).fail("unknown field");
        }
    }

    // The single key of a tagged object.
    std::string tag() const {
        expect_object();
        if (j_.size() != 1) fail("expected exactly one key naming the kind");
        return j_.begin().key();
    }

    double number() const {
        if (!j_.is_number()) fail("expected a number");
        const double v = j_.get<double>();
        if (!std::isfinite(v)) fail("expected a finite number");
        return v;
    }
    double positive() const {
        const double v = number();
        if (!(v > 0.0)) fail("must be > 0");
        return v;
    }
    std::size_t count(std::size_t min = 1) const {
        if (!j_.is_number_integer() || j_.get<std::int64_t>() < static_cast<std::int64_t>(min)) {
            fail("expected an integer >= " + std::to_string(min));
        }
        return j_.get<std::size_t>();
    }
    std::uint64_t seed() const {
        if (!j_.is_number_unsigned() && !(j_.is_number_integer() && j_.get<std::int64_t>() >= 0)) {
            fail("expected a nonnegative integer");
        }
        return j_.get<std::uint64_t>();
    }
    std::string string() const {
        if (!j_.is_string()) fail("expected a string");
        return j_.get<std::string>();
    }

    double number_or(const std::string& key, double fallback) const {
        return has(key) ? at(key).number() : fallback;
    }

private:
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& j_;
    std::string path_;
};

// Runs a constructor and reports its spec_error at the node.
template <class F>
auto guarded(const Node& n, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const spec_error& e) {
        n.fail(e.what());
    }
}

inline Distribution parse_law(const Node& n) {
    const std::string kind = n.tag();
    const Node v = n.at(kind);
    return guarded(n, [&]() -> Distribution {
        if (kind == "degenerate") return Distribution::degenerate(v.number());
        if (kind == "uniform") {
            v.expect_array();
            if (v.size() != 2) v.fail("expected [lo, hi]");
            return Distribution::uniform(v.at(0).number(), v.at(1).number());
        }
        if (kind == "exponential" || kind == "erlang_two") {
            v.allow_only({"rate", "shift"});
            const double rate = v.at("rate").number();
            const double shift = v.number_or("shift", 0.0);
            return kind == "exponential" ? Distribution::exponential(rate, shift)
                                         : Distribution::erlang_two(rate, shift);
        }
        if (kind == "discrete") {
            v.expect_array();
            std::vector<Atom> atoms;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const Node a = v.at(i);
                a.expect_array();
                if (a.size() != 2) a.fail("expected [value, probability]");
                atoms.push_back({a.at(0).number(), a.at(1).number()});
            }
            return Distribution::discrete(std::move(atoms));
        }
        if (kind == "mixture") {
            v.expect_array();
            std::vector<MixtureComponent> comps;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const Node c = v.at(i);
                c.allow_only({"weight", "law"});
                comps.push_back({c.at("weight").number(), parse_law(c.at("law"))});
            }
            return Distribution::mixture(std::move(comps));
        }
        if (kind == "difference") {
            v.allow_only({"minuend", "scale", "subtrahend"});
            return Distribution::difference(parse_law(v.at("minuend")), v.at("scale").number(),
                                            parse_law(v.at("subtrahend")));
        }
        if (kind == "harmonic_erlang_claim") {
            v.allow_only({"index", "rate"});
            return harmonic_erlang_claim(v.at("index").count(), v.number_or("rate", 1.0));
        }
        n.fail("unknown distribution kind '" + kind + "'");
    });
}

inline std::vector<Distribution> parse_laws(const Node& n) {
    n.expect_array();
    std::vector<Distribution> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(parse_law(n.at(i)));
    return out;
}

inline SequenceSpec parse_sequence(const Node& n) {
    n.expect_object();
    const std::size_t horizon = n.has("horizon") ? n.at("horizon").count() : 0;
    if (n.has("periodic")) {
        n.allow_only({"periodic", "horizon"});
        const Node p = n.at("periodic");
        p.allow_only({"preperiod", "cycle"});
        auto pre = p.has("preperiod") ? parse_laws(p.at("preperiod")) : std::vector<Distribution>{};
        auto cycle = parse_laws(p.at("cycle"));
        return guarded(n, [&] { return SequenceSpec::periodic(std::move(pre), std::move(cycle), horizon); });
    }
    if (n.has("iid")) {
        n.allow_only({"iid", "horizon"});
        auto law = parse_law(n.at("iid"));
        return guarded(n, [&] { return SequenceSpec::iid(std::move(law), horizon); });
    }
    if (n.has("family")) {
        n.allow_only({"family", "params", "head", "horizon"});
        const std::string name = n.at("family").string();
        std::map<std::string, double> params;
        if (n.has("params")) {
            const Node p = n.at("params");
            p.expect_object();
            for (const auto& [k, v] : p.raw().items()) params[k] = Node(v, p.path() + "." + k).number();
        }
        auto head = n.has("head") ? parse_laws(n.at("head")) : std::vector<Distribution>{};
        if (horizon == 0) n.fail("family sequences need an explicit 'horizon'");
        return guarded(n, [&] { return make_family(name, params, std::move(head), horizon); });
    }
    n.fail("expected one of 'periodic', 'iid' or 'family'");
}

inline StatedConstants parse_stated(const Node& n, bool risk) {
    StatedConstants s;
    const char* a = risk ? "alpha" : "a";
    const char* d1 = risk ? "nu1" : "d1";
    const char* d2 = risk ? "nu2" : "d2";
    n.allow_only({a, "epsilon", d1, d2});
    if (n.has(a)) s.a = n.at(a).positive();
    if (n.has("epsilon")) {
        s.epsilon = n.at("epsilon").number();
        if (*s.epsilon < 0.0) n.at("epsilon").fail("must be >= 0");
    }
    for (auto [key, slot] : {std::pair{d1, &s.d1}, std::pair{d2, &s.d2}}) {
        if (!n.has(key)) continue;
        *slot = n.at(key).number();
        if (**slot < 1.0) n.at(key).fail("must be >= 1");
    }
    return s;
}

inline ConstantsSection parse_constants(const Node& n, bool risk) {
    ConstantsSection k;
    const char* h = risk ? "gamma" : "h";
    const char* c = risk ? "kappa" : "c";
    const char* b = risk ? "beta" : "b";
    n.allow_only({h, c, b, "delta", "stated"});
    k.h = n.at(h).positive();
    k.c = n.at(c).positive();
    if (n.has(b)) k.b = n.at(b).count();
    if (n.has("delta")) {
        k.delta = n.at("delta").number();
        if (!(*k.delta > 0.0 && *k.delta <= 0.5)) n.at("delta").fail("must lie in (0, 1/2]");
    }
    if (n.has("stated")) k.stated = parse_stated(n.at("stated"), risk);
    return k;
}

inline SimulationSection parse_simulation(const Node& n) {
    SimulationSection s;
    n.allow_only({"trials", "horizon", "seed", "confidence_level", "time_horizon", "grid"});
    if (n.has("trials")) s.plan.trials = n.at("trials").count();
    if (n.has("horizon")) s.plan.horizon = n.at("horizon").count();
    if (n.has("seed")) s.plan.seed = n.at("seed").seed();
    if (n.has("confidence_level")) {
        s.plan.confidence_level = n.at("confidence_level").number();
        if (!(s.plan.confidence_level > 0.0 && s.plan.confidence_level < 1.0)) {
            n.at("confidence_level").fail("must lie in (0, 1)");
        }
    }
    if (n.has("time_horizon")) s.plan.time_horizon = n.at("time_horizon").positive();
    if (n.has("grid")) {
        const Node g = n.at("grid");
        if (g.raw().is_string()) {
            try {
                s.grid = parse_grid(g.string());
            } catch (const config_error& e) {
                g.fail(e.what());
            }
        } else {
            g.expect_array();
            for (std::size_t i = 0; i < g.size(); ++i) {
                s.grid.push_back(g.at(i).number());
                if (s.grid.back() < 0.0) g.at(i).fail("thresholds must be >= 0");
            }
        }
    }
    return s;
}

inline std::string line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace detail

inline JobConfig config_from_json(const json& j) {
    const detail::Node root(j, "");
    root.allow_only({"model", "constants", "simulation", "output"});
    JobConfig cfg;
    const auto model = root.at("model");
    model.expect_object();
    if (model.has("walk") == model.has("risk")) model.fail("exactly one of 'walk' or 'risk' is required");
    const bool risk = model.has("risk");
    model.allow_only({"walk", "risk"});
    if (risk) {
        const auto r = model.at("risk");
        r.allow_only({"p", "claims", "interarrivals"});
        RiskModelSpec spec{r.at("p").positive(), detail::parse_sequence(r.at("claims")),
                           detail::parse_sequence(r.at("interarrivals"))};
        detail::guarded(r, [&] { spec.validate(); });
        cfg.model = RiskModel{std::move(spec)};
    } else {
        cfg.model = WalkModel{detail::parse_sequence(model.at("walk"))};
    }
    cfg.constants = detail::parse_constants(root.at("constants"), risk);
    if (root.has("simulation")) cfg.simulation = detail::parse_simulation(root.at("simulation"));
    if (root.has("output")) {
        const auto out = root.at("output");
        out.allow_only({"format", "plot"});
        if (out.has("format")) {
            try {
                cfg.output.format = parse_format(out.at("format").string());
            } catch (const config_error& e) {
                out.at("format").fail(e.what());
            }
        }
        if (out.has("plot")) cfg.output.plot = out.at("plot").string();
    }
    return cfg;
}

inline JobConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error("config is not valid JSON at " + detail::line_column(text, e.byte ? e.byte - 1 : 0) +
                           ": " + e.what());
    }
    return config_from_json(j);
}

inline JobConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// Serialization. Distributions are written structurally, so a named claim
// law comes back as its mixture.

inline json to_json(const Distribution& d) {
    return std::visit(
        [](const auto& v) -> json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return {{"degenerate", v.point}};
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                json atoms = json::array();
                for (const auto& a : v.atoms) atoms.push_back({a.value, a.prob});
                return {{"discrete", atoms}};
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return {{"uniform", {v.lo, v.hi}}};
            } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                return {{"exponential", {{"rate", v.rate}, {"shift", v.shift}}}};
            } else if constexpr (std::is_same_v<T, ErlangTwo>) {
                return {{"erlang_two", {{"rate", v.rate}, {"shift", v.shift}}}};
            } else if constexpr (std::is_same_v<T, Mixture>) {
                json comps = json::array();
                for (const auto& c : v.components) comps.push_back({{"weight", c.weight}, {"law", to_json(c.dist)}});
                return {{"mixture", comps}};
            } else {
                return {{"difference",
                         {{"minuend", to_json(*v.minuend)}, {"scale", v.scale}, {"subtrahend", to_json(*v.subtrahend)}}}};
            }
        },
        d.variant());
}

inline json to_json(const SequenceSpec& seq) {
    auto laws = [](const std::vector<Distribution>& ds) {
        json a = json::array();
        for (const auto& d : ds) a.push_back(to_json(d));
        return a;
    };
    if (const auto* p = seq.periodic_rule()) {
        return {{"periodic", {{"preperiod", laws(p->preperiod)}, {"cycle", laws(p->cycle)}}},
                {"horizon", seq.horizon()}};
    }
    const auto* q = seq.parametric_rule();
    if (q->family == "custom") throw config_error("custom parametric sequences cannot be serialized");
    json j{{"family", q->family}, {"horizon", seq.horizon()}};
    if (!q->params.empty()) j["params"] = q->params;
    if (!q->head.empty()) j["head"] = laws(q->head);
    return j;
}

inline json to_json(const JobConfig& cfg) {
    const bool risk = cfg.is_risk();
    json j;
    if (risk) {
        const auto& m = std::get<RiskModel>(cfg.model).spec;
        j["model"]["risk"] = {{"p", m.p}, {"claims", to_json(m.claims)}, {"interarrivals", to_json(m.interarrivals)}};
    } else {
        j["model"]["walk"] = to_json(std::get<WalkModel>(cfg.model).sequence);
    }
    const auto& k = cfg.constants;
    json c{{risk ? "gamma" : "h", k.h}, {risk ? "kappa" : "c", k.c}};
    if (k.b) c[risk ? "beta" : "b"] = *k.b;
    if (k.delta) c["delta"] = *k.delta;
    if (!k.stated.empty()) {
        json s = json::object();
        if (k.stated.a) s[risk ? "alpha" : "a"] = *k.stated.a;
        if (k.stated.epsilon) s["epsilon"] = *k.stated.epsilon;
        if (k.stated.d1) s[risk ? "nu1" : "d1"] = *k.stated.d1;
        if (k.stated.d2) s[risk ? "nu2" : "d2"] = *k.stated.d2;
        c["stated"] = s;
    }
    j["constants"] = c;
    const auto& s = cfg.simulation;
    json sim{{"trials", s.plan.trials},
             {"horizon", s.plan.horizon},
             {"seed", s.plan.seed},
             {"confidence_level", s.plan.confidence_level}};
    if (s.plan.time_horizon) sim["time_horizon"] = *s.plan.time_horizon;
    if (!s.grid.empty()) sim["grid"] = s.grid;
    j["simulation"] = sim;
    j["output"]["format"] = format_name(cfg.output.format);
    if (cfg.output.plot) j["output"]["plot"] = *cfg.output.plot;
    return j;
}

} // namespace rwbound
