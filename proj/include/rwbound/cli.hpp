#pragma once

// Command layer behind the rwbound executable. Each command builds a Report;
// run_cli maps errors to exit codes:
//   0 ok, 2 config error, 3 infeasible constants, 4 golden mismatch,
//   5 bound-domination failure, 1 anything else.

#include "rwbound/bounds.hpp"
#include "rwbound/catalog.hpp"
#include "rwbound/config.hpp"
#include "rwbound/mc.hpp"
#include "rwbound/report.hpp"
#include "rwbound/riskmodel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rwbound {

enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitConfig = 2,
    kExitInfeasible = 3,
    kExitGolden = 4,
    kExitDomination = 5,
};

struct CliOptions {
    std::optional<std::string> config;
    std::optional<double> delta;
    std::optional<double> x;
    std::optional<std::string> grid;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> horizon;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> format;
    std::optional<std::string> out;
    std::string which = "all";
};

struct CommandResult {
    Report report;
    int exit_code = kExitOk;
};

namespace detail {

inline JobConfig load_job(const CliOptions& o) {
    if (!o.config) throw config_error("--config is required for this command");
    JobConfig cfg = load_config(*o.config);
    if (o.delta) {
        if (!(*o.delta > 0.0 && *o.delta <= 0.5)) throw config_error("--delta must lie in (0, 1/2]");
        cfg.constants.delta = *o.delta;
    }
    if (o.trials) cfg.simulation.plan.trials = *o.trials;
    if (o.horizon) cfg.simulation.plan.horizon = *o.horizon;
    if (o.seed) cfg.simulation.plan.seed = *o.seed;
    if (o.format) cfg.output.format = parse_format(*o.format);
    if (o.x && o.grid) throw config_error("give either --x/--u or --grid, not both");
    if (o.x) {
        if (!(*o.x >= 0.0)) throw config_error("--x/--u must be >= 0");
        cfg.simulation.grid = {*o.x};
    }
    if (o.grid) cfg.simulation.grid = parse_grid(*o.grid);
    return cfg;
}

inline Cell attained(const AverageCertificate& c) {
    if (c.attained_at) return static_cast<std::int64_t>(*c.attained_at);
    return std::string("limit");
}

inline void certificate_rows(Table& t, const std::string& scope, const BoundCertificate& c) {
    t.add({scope, "delta", c.delta});
    t.add({scope, "Delta", c.capital_delta});
    t.add({scope, "big_M", c.big_m});
    t.add({scope, "S", c.s});
    t.add({scope, "prefactor", c.c1});
    t.add({scope, "rate", c.rate});
    t.add({scope, "crossover_x", c.crossover_x});
}

inline bool homogeneous(const SequenceSpec& s) {
    const auto* p = s.periodic_rule();
    return p && p->preperiod.empty() && p->cycle.size() == 1;
}

inline bool all_point_masses(const RiskModelSpec& m) {
    try {
        exact_ruin_degenerate(m, 0.0);
        return true;
    } catch (const spec_error&) {
        return false;
    }
}

// Constants actually fed to the bound: derived values with stated ones
// substituted, after checking the stated ones are conservative.
struct Resolved {
    bool risk = false;
    double p = 1.0;
    TheoremConstants derived;  // risk configs: mapped corollary constants
    TheoremConstants used;
    std::optional<CorollaryTwoConstants> corollary_used;
    std::optional<DerivedConstants> walk_inputs;
    std::optional<CorollaryTwoInputs> risk_inputs;
    std::vector<std::string> warnings;
};

inline void check_stated(const char* name, double derived, double stated, bool stated_may_exceed) {
    const bool ok = stated_may_exceed ? stated >= derived : stated <= derived;
    if (ok) return;
    std::ostringstream msg;
    msg << "stated " << name << " = " << stated << " is " << (stated_may_exceed ? "below" : "above")
        << " the derived value " << derived << "; the conditions would not hold";
    throw infeasible_error(msg.str());
}

inline std::size_t pick_b(const SequenceSpec& seq) {
    try {
        return suggest_b(seq);
    } catch (const infeasible_error& e) {
        const auto sup = sup_tail_average(seq, fn::Mean{}, seq.horizon());
        std::ostringstream msg;
        msg << "condition (i) fails: " << e.what() << " (sup of averaged means over n >= " << seq.horizon()
            << " is " << sup.value << ")";
        throw infeasible_error(msg.str());
    }
}

inline Resolved resolve(const JobConfig& cfg) {
    Resolved r;
    const auto& k = cfg.constants;
    const auto& s = k.stated;
    if (const auto* w = std::get_if<WalkModel>(&cfg.model)) {
        const std::size_t b = k.b ? *k.b : pick_b(w->sequence);
        r.walk_inputs = derive_constants(w->sequence, k.h, k.c, b);
        r.derived = r.walk_inputs->constants;
        r.used = r.derived;
        if (s.a) check_stated("a", r.derived.a, *s.a, false), r.used.a = *s.a;
        if (s.epsilon) check_stated("epsilon", r.derived.epsilon, *s.epsilon, true), r.used.epsilon = *s.epsilon;
        if (s.d1) check_stated("d1", r.derived.d1, *s.d1, true), r.used.d1 = *s.d1;
        if (s.d2) check_stated("d2", r.derived.d2, *s.d2, true), r.used.d2 = *s.d2;
        return r;
    }
    const auto& m = std::get<RiskModel>(cfg.model).spec;
    r.risk = true;
    r.p = m.p;
    const std::size_t beta = k.b ? *k.b : pick_b(to_increment_sequence(m, &r.warnings));
    r.risk_inputs = derive_corollary2_inputs(m, k.h, k.c, beta);
    CorollaryTwoConstants used = r.risk_inputs->constants;
    const auto& d = r.risk_inputs->constants;
    if (s.a) check_stated("alpha", d.alpha, *s.a, false), used.alpha = *s.a;
    if (s.epsilon) check_stated("epsilon", d.epsilon, *s.epsilon, true), used.epsilon = *s.epsilon;
    if (s.d1) check_stated("nu1", d.nu1, *s.d1, true), used.nu1 = *s.d1;
    if (s.d2) check_stated("nu2", d.nu2, *s.d2, true), used.nu2 = *s.d2;
    r.corollary_used = used;
    r.derived = map_to_theorem(d, m.p);
    r.used = map_to_theorem(used, m.p);
    return r;
}

inline BoundCertificate certify(const Resolved& r, const JobConfig& cfg, Report& rep) {
    if (cfg.constants.delta) {
        return r.risk ? lundberg_certificate(*r.corollary_used, r.p, *cfg.constants.delta)
                      : make_certificate(r.used, *cfg.constants.delta);
    }
    rep.note("no delta given; using (1 - 1e-3) * delta_max");
    const double delta = (1.0 - kAsymptoticMargin) * max_feasible_delta(r.used);
    return r.risk ? lundberg_certificate(*r.corollary_used, r.p, delta) : make_certificate(r.used, delta);
}

inline double drift_margin(const Resolved& r) { return r.risk ? r.corollary_used->alpha : r.used.a; }

inline void write_plot(const std::string& path, const std::vector<DominationRow>& rows) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write plot data to '" + path + "'");
    out << "x,bound,estimate,ci_low,ci_high\n" << std::setprecision(17);
    for (const auto& row : rows) {
        out << row.estimate.threshold << ',' << row.bound << ',' << row.estimate.point << ','
            << row.estimate.ci_low << ',' << row.estimate.ci_high << '\n';
    }
}

} // namespace detail

inline CommandResult cmd_conditions(const JobConfig& cfg) {
    CommandResult res;
    auto& rep = res.report;
    const auto r = detail::resolve(cfg);
    auto& cond = rep.table("conditions", {"condition", "quantity", "value", "attained_at", "horizon_used", "error_budget"});
    auto head_row = [&](const char* q, double v) {
        cond.add({"(iv)", q, v, std::string("max n<b"), static_cast<std::int64_t>(0), 0.0});
    };
    auto row = [&](const char* id, const char* q, const AverageCertificate& c) {
        cond.add({id, q, c.value, detail::attained(c), static_cast<std::int64_t>(c.horizon_used), c.error_budget});
    };
    if (r.walk_inputs) {
        const auto& w = *r.walk_inputs;
        row("(i)", "sup avg E xi", w.drift);
        row("(ii)", "sup avg E(|xi|; xi <= -c)", w.truncation);
        row("(iii)", "sup avg P(xi <= 0) + E(e^{h xi}; xi > 0)", w.tail_mass);
        head_row("max avg P(xi <= 0) + E(e^{h xi}; xi > 0)", w.head_mass);
    } else {
        const auto& w = *r.risk_inputs;
        row("(i)", "sup avg E Z - p E theta", w.drift);
        row("(ii)", "sup avg E(theta; theta >= kappa/p)", w.interarrival);
        row("(iii)", "sup avg E e^{gamma Z}", w.exp_moment);
        head_row("max avg E e^{gamma Z}", w.head_exp_moment);
    }

    auto& consts = rep.table("constants", {"name", "derived", "used"});
    if (r.risk) {
        const auto& d = r.risk_inputs->constants;
        const auto& u = *r.corollary_used;
        consts.add({"alpha", d.alpha, u.alpha});
        consts.add({"beta", static_cast<std::int64_t>(d.beta), static_cast<std::int64_t>(u.beta)});
        consts.add({"kappa", d.kappa, u.kappa});
        consts.add({"epsilon", d.epsilon, u.epsilon});
        consts.add({"gamma", d.gamma, u.gamma});
        consts.add({"nu1", d.nu1, u.nu1});
        consts.add({"nu2", d.nu2, u.nu2});
    } else {
        const auto& d = r.derived;
        const auto& u = r.used;
        consts.add({"a", d.a, u.a});
        consts.add({"b", static_cast<std::int64_t>(d.b), static_cast<std::int64_t>(u.b)});
        consts.add({"c", d.c, u.c});
        consts.add({"epsilon", d.epsilon, u.epsilon});
        consts.add({"h", d.h, u.h});
        consts.add({"d1", d.d1, u.d1});
        consts.add({"d2", d.d2, u.d2});
    }

    auto& feas = rep.table("feasibility", {"quantity", "value"});
    feas.add({"big_M", big_m(r.used)});
    if (r.used.a > r.used.epsilon * (1.0 + 1e-15)) {
        feas.add({"delta_max", max_feasible_delta(r.used)});
        feas.add({"verdict", std::string("feasible for delta in (0, delta_max)")});
    } else {
        feas.add({"verdict", std::string("infeasible: drift margin does not exceed epsilon")});
        res.exit_code = kExitInfeasible;
    }
    for (const auto& w : r.warnings) rep.note(w);
    return res;
}

inline CommandResult cmd_bound(const JobConfig& cfg) {
    CommandResult res;
    auto& rep = res.report;
    const auto r = detail::resolve(cfg);
    const auto cert = detail::certify(r, cfg, rep);
    auto& t = rep.table("certificate", {"scope", "quantity", "value"});
    detail::certificate_rows(t, r.risk ? "corollary" : "theorem", cert);
    if (!cfg.simulation.grid.empty()) {
        auto& b = rep.table("bound", {r.risk ? "u" : "x", "bound"});
        for (double x : cfg.simulation.grid) b.add({x, cert.bound(x)});
    }
    return res;
}

inline CommandResult cmd_optimize(const JobConfig& cfg) {
    CommandResult res;
    auto& rep = res.report;
    const auto r = detail::resolve(cfg);
    const auto grid = cfg.simulation.grid.empty() ? std::vector<double>{0.0} : cfg.simulation.grid;
    auto& t = rep.table("optimize", {"objective", "x", "delta", "prefactor", "rate", "crossover_x", "bound"});
    for (double x : grid) {
        const auto c = optimize_delta(r.used, AtPoint{x});
        t.add({"at_point", x, c.delta, c.c1, c.rate, c.crossover_x, c.bound(x)});
    }
    const auto a = optimize_delta(r.used, AsymptoticRate{});
    t.add({"asymptotic_rate", std::string("-"), a.delta, a.c1, a.rate, a.crossover_x, std::string("-")});
    return res;
}

inline CommandResult cmd_ruin_bound(const JobConfig& cfg) {
    if (!cfg.is_risk()) throw config_error("ruin-bound needs a 'risk' model section");
    CommandResult res;
    auto& rep = res.report;
    const auto& m = std::get<RiskModel>(cfg.model).spec;
    const auto r = detail::resolve(cfg);
    const auto cert = detail::certify(r, cfg, rep);
    auto& t = rep.table("certificate", {"scope", "quantity", "value"});
    detail::certificate_rows(t, "corollary", cert);

    // Theorem applied straight to the increments, same (h, c, b).
    std::optional<BoundCertificate> direct;
    try {
        const auto xi = to_increment_sequence(m);
        const auto dk = derive_constants(xi, cfg.constants.h, cfg.constants.c, r.used.b).constants;
        const double dmax = max_feasible_delta(dk);
        const double delta = cert.delta < dmax ? cert.delta : (1.0 - kAsymptoticMargin) * dmax;
        direct = make_certificate(dk, delta);
        detail::certificate_rows(t, "direct", *direct);
    } catch (const infeasible_error& e) {
        rep.note(std::string("direct theorem on increments not available: ") + e.what());
    }

    std::optional<double> adj;
    const bool homog = detail::homogeneous(m.claims) && detail::homogeneous(m.interarrivals);
    if (homog) {
        adj = adjustment_coefficient(m.claims.at(1), m.interarrivals.at(1), m.p);
        auto& base = rep.table("adjustment_coefficient", {"quantity", "value"});
        if (adj) {
            base.add({"R", *adj});
        } else {
            base.add({"R", std::string("none")});
        }
    }
    const bool exact = detail::all_point_masses(m);

    if (!cfg.simulation.grid.empty()) {
        std::vector<std::string> cols{"u", "corollary_bound", "direct_bound"};
        if (adj) cols.push_back("classical_e^{-Ru}");
        if (exact) cols.push_back("exact_psi");
        auto& b = rep.table("ruin_bound", cols);
        for (double u : cfg.simulation.grid) {
            std::vector<Cell> row{u, cert.bound(u)};
            row.push_back(direct ? Cell{direct->bound(u)} : Cell{std::string("n/a")});
            if (adj) row.push_back(std::exp(-*adj * u));
            if (exact) row.push_back(static_cast<std::int64_t>(exact_ruin_degenerate(m, u)));
            b.add(std::move(row));
        }
    }
    for (const auto& w : r.warnings) rep.note(w);
    return res;
}

inline CommandResult cmd_simulate(const JobConfig& cfg) {
    CommandResult res;
    auto& rep = res.report;
    auto plan = cfg.simulation.plan;
    plan.validate();
    if (cfg.simulation.grid.empty()) throw config_error("simulate needs thresholds: --x/--u, --grid or simulation.grid");
    const auto& grid = cfg.simulation.grid;

    std::optional<detail::Resolved> r;
    std::optional<BoundCertificate> cert;
    try {
        r = detail::resolve(cfg);
        cert = detail::certify(*r, cfg, rep);
    } catch (const infeasible_error& e) {
        rep.note(std::string("no certified bound, domination not checked: ") + e.what());
    }

    std::vector<SimulationEstimate> est;
    if (const auto* w = std::get_if<WalkModel>(&cfg.model)) {
        est = simulate_sup_grid(w->sequence, grid, plan);
    } else {
        est = simulate_ruin_grid(std::get<RiskModel>(cfg.model).spec, grid, plan);
    }

    auto& t = rep.table("simulation",
                        {"threshold", "hits", "trials", "estimate", "ci_low", "ci_high", "bound", "margin", "status"});
    std::vector<DominationRow> rows;
    if (cert) {
        const auto dom = detail::compare(est, *cert);
        rows = dom.rows;
        if (!dom.all_pass) res.exit_code = kExitDomination;
    } else {
        for (const auto& e : est) rows.push_back({e, 1.0, 1.0 - e.ci_low, true});
    }
    for (const auto& row : rows) {
        const auto& e = row.estimate;
        t.add({e.threshold, static_cast<std::int64_t>(e.hits), static_cast<std::int64_t>(e.trials), e.point,
               e.ci_low, e.ci_high, cert ? Cell{row.bound} : Cell{std::string("n/a")},
               cert ? Cell{row.margin} : Cell{std::string("n/a")},
               std::string(!cert ? "unchecked" : row.pass ? "pass" : "FAIL")});
    }
    auto& p = rep.table("plan", {"quantity", "value"});
    p.add({"seed", static_cast<std::int64_t>(plan.seed)});
    p.add({"horizon", static_cast<std::int64_t>(plan.horizon)});
    p.add({"confidence_level", plan.confidence_level});
    if (plan.time_horizon) p.add({"time_horizon", *plan.time_horizon});
    p.add({"threads", static_cast<std::int64_t>(thread_count())});
    if (r) {
        const double top = *std::max_element(grid.begin(), grid.end());
        if (auto adv = horizon_advisory(detail::drift_margin(*r), top, plan.horizon)) rep.note(*adv);
    }
    if (cfg.output.plot) detail::write_plot(*cfg.output.plot, rows);
    return res;
}

inline CommandResult cmd_examples(const std::string& which) {
    CommandResult res;
    auto& rep = res.report;
    std::vector<int> ids;
    if (which == "all") {
        for (int i = 1; i <= kExampleCount; ++i) ids.push_back(i);
    } else {
        try {
            std::size_t used = 0;
            ids.push_back(std::stoi(which, &used));
            if (used != which.size()) throw std::invalid_argument(which);
        } catch (const std::exception&) {
            throw config_error("examples: expected 1.." + std::to_string(kExampleCount) + " or all, got '" + which + "'");
        }
        if (ids[0] < 1 || ids[0] > kExampleCount) {
            throw config_error("examples: expected 1.." + std::to_string(kExampleCount) + " or all");
        }
    }
    auto& t = rep.table("golden", {"example", "quantity", "computed", "expected_low", "expected_high", "status"});
    for (int id : ids) {
        const auto run = run_example(id);
        for (const auto& c : run.checks) {
            t.add({static_cast<std::int64_t>(id), c.quantity, c.computed, c.lo, c.hi,
                   std::string(c.pass() ? "pass" : "MISMATCH")});
        }
        if (!run.pass()) res.exit_code = kExitGolden;
    }
    return res;
}

// Parses arguments, runs one subcommand and renders its report.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Certified exponential tail bounds for inhomogeneous random walks and renewal risk models"};
    app.require_subcommand(1);
    CliOptions o;

    auto common = [&o](CLI::App* s, bool grid_opts, bool sim_opts) {
        s->add_option("--config", o.config, "JSON job config")->check(CLI::ExistingFile);
        s->add_option("--delta", o.delta, "delta in (0, 1/2]");
        if (grid_opts) {
            s->add_option("--x,--u", o.x, "single threshold");
            s->add_option("--grid", o.grid, "thresholds a:b:step");
        }
        if (sim_opts) {
            s->add_option("--trials", o.trials, "Monte Carlo trials");
            s->add_option("--horizon", o.horizon, "increments per trial");
            s->add_option("--seed", o.seed, "base seed");
        }
        s->add_option("--format", o.format, "text, json-lines or csv")
            ->check(CLI::IsMember({"text", "json-lines", "csv"}));
        s->add_option("--out", o.out, "write the report here instead of stdout");
    };
    auto* conditions = app.add_subcommand("conditions", "derive the constants and check feasibility");
    common(conditions, false, false);
    auto* bound = app.add_subcommand("bound", "certificate and bound values");
    common(bound, true, false);
    auto* optimize = app.add_subcommand("optimize", "choose delta per threshold");
    common(optimize, true, false);
    auto* ruin = app.add_subcommand("ruin-bound", "ruin-probability bounds for a risk model");
    common(ruin, true, false);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates checked against the bound");
    common(simulate, true, true);
    auto* examples = app.add_subcommand("examples", "reproduce the four worked models");
    examples->add_option("which", o.which, "1, 2, 3, 4 or all");
    examples->add_option("--format", o.format, "text, json-lines or csv")
        ->check(CLI::IsMember({"text", "json-lines", "csv"}));
    examples->add_option("--out", o.out, "write the report here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        CommandResult res;
        OutputFormat format = o.format ? parse_format(*o.format) : OutputFormat::text;
        if (*examples) {
            res = cmd_examples(o.which);
        } else {
            const JobConfig cfg = detail::load_job(o);
            format = cfg.output.format;
            if (*conditions) res = cmd_conditions(cfg);
            if (*bound) res = cmd_bound(cfg);
            if (*optimize) res = cmd_optimize(cfg);
            if (*ruin) res = cmd_ruin_bound(cfg);
            if (*simulate) res = cmd_simulate(cfg);
        }
        if (o.out) {
            std::ofstream file(*o.out);
            if (!file) throw config_error("cannot write '" + *o.out + "'");
            render(res.report, format, file);
        } else {
            render(res.report, format, out);
        }
        if (res.exit_code == kExitGolden) err << "golden mismatch: see rows marked MISMATCH\n";
        if (res.exit_code == kExitDomination) err << "bound domination failed: see rows marked FAIL\n";
        return res.exit_code;
    } catch (const config_error& e) {
        err << e.what() << '\n';
        return kExitConfig;
    } catch (const spec_error& e) {
        err << "invalid specification: " << e.what() << '\n';
        return kExitConfig;
    } catch (const infeasible_error& e) {
        err << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitOther;
    }
}

} // namespace rwbound
