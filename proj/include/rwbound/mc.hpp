#pragma once

// Monte Carlo estimates of P(max_{n <= N} S_n > x) and of (finite-time) ruin
// probabilities, used to falsify certified bounds. Every trial draws from its
// own substream keyed by (seed, trial index), so hit counts are identical for
// any number of worker threads.

#include "rwbound/bounds.hpp"
#include "rwbound/riskmodel.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace rwbound {

struct SimulationPlan {
    std::size_t trials = 100000;
    std::size_t horizon = 10000;
    double threshold = 0.0;
    std::uint64_t seed = 42;
    double confidence_level = 0.99;
    // Ruin only: stop a trial once the claim epochs pass this time.
    std::optional<double> time_horizon;

    void validate() const {
        if (trials < 1) throw spec_error("simulation: trials must be >= 1");
        if (horizon < 1) throw spec_error("simulation: horizon must be >= 1");
        if (!(confidence_level > 0.0 && confidence_level < 1.0)) {
            throw spec_error("simulation: confidence_level must lie in (0, 1)");
        }
        if (time_horizon && !(*time_horizon > 0.0)) {
            throw spec_error("simulation: time_horizon must be > 0");
        }
        if (!std::isfinite(threshold)) throw spec_error("simulation: threshold must be finite");
    }
};

struct SimulationEstimate {
    double threshold = 0.0;
    std::uint64_t hits = 0;
    std::uint64_t trials = 0;
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
};

// Exact (Clopper-Pearson) two-sided interval.
inline std::pair<double, double> clopper_pearson(std::uint64_t hits, std::uint64_t trials,
                                                 double level) {
    if (trials == 0 || hits > trials) throw spec_error("clopper_pearson: need 0 <= hits <= trials > 0");
    const double alpha = 1.0 - level;
    const double k = static_cast<double>(hits);
    const double n = static_cast<double>(trials);
    const double lo = hits == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, alpha / 2.0);
    const double hi = hits == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - alpha / 2.0);
    return {lo, hi};
}

inline SimulationEstimate make_estimate(double threshold, std::uint64_t hits, std::uint64_t trials,
                                        double level) {
    SimulationEstimate e;
    e.threshold = threshold;
    e.hits = hits;
    e.trials = trials;
    e.point = static_cast<double>(hits) / static_cast<double>(trials);
    std::tie(e.ci_low, e.ci_high) = clopper_pearson(hits, trials, level);
    return e;
}

// Worker count from RWBOUND_THREADS, else the hardware concurrency.
inline unsigned thread_count() {
    if (const char* env = std::getenv("RWBOUND_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(std::min(v, 1024L));
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

// Distributions flattened into a node array. Draws consume the stream in the
// same order as sample(), so both produce identical variates.
class FlatLaws {
public:
    // Appends a law; returns its root node.
    std::uint32_t add(const Distribution& d) {
        return std::visit([this](const auto& k) { return this->add_kind(k); }, d.variant());
    }

    double draw(std::uint32_t id, RandomStream& stream) const {
        const Node& n = nodes_[id];
        switch (n.kind) {
        case Kind::point: return n.a;
        case Kind::uniform: return n.a + n.b * stream.uniform();
        case Kind::exponential: return n.a + -std::log(stream.uniform()) / n.b;
        case Kind::erlang: {
            const double u1 = stream.uniform();
            const double u2 = stream.uniform();
            return n.a - std::log(u1 * u2) / n.b;
        }
        case Kind::choice: {
            double u = stream.uniform();
            for (std::uint32_t j = 0; j + 1 < n.count; ++j) {
                const double w = weights_[n.first + j];
                if (u < w) return pick(n, j, stream);
                u -= w;
            }
            return pick(n, n.count - 1, stream);
        }
        case Kind::difference: {
            const double z = draw(children_[n.first], stream);
            return z - n.a * draw(children_[n.first + 1], stream);
        }
        }
        return 0.0;
    }

private:
    enum class Kind : std::uint8_t { point, uniform, exponential, erlang, choice, difference };
    struct Node {
        Kind kind = Kind::point;
        bool atoms = false;  // choice over values rather than child laws
        std::uint32_t first = 0;
        std::uint32_t count = 0;
        double a = 0.0;
        double b = 0.0;
    };

    double pick(const Node& n, std::uint32_t j, RandomStream& stream) const {
        return n.atoms ? values_[n.first + j] : draw(children_[n.first + j], stream);
    }

    std::uint32_t push(Node n) {
        nodes_.push_back(n);
        return static_cast<std::uint32_t>(nodes_.size() - 1);
    }

    std::uint32_t add_kind(const Degenerate& k) { return push({Kind::point, false, 0, 0, k.point, 0.0}); }
    std::uint32_t add_kind(const Uniform& k) {
        return push({Kind::uniform, false, 0, 0, k.lo, k.hi - k.lo});
    }
    std::uint32_t add_kind(const ShiftedExponential& k) {
        return push({Kind::exponential, false, 0, 0, k.shift, k.rate});
    }
    std::uint32_t add_kind(const ErlangTwo& k) {
        return push({Kind::erlang, false, 0, 0, k.shift, k.rate});
    }
    std::uint32_t add_kind(const FiniteDiscrete& k) {
        Node n{Kind::choice, true, static_cast<std::uint32_t>(weights_.size()),
               static_cast<std::uint32_t>(k.atoms.size()), 0.0, 0.0};
        // weights_ and values_ share offsets; children_ is padded to match.
        for (const auto& at : k.atoms) {
            weights_.push_back(at.prob);
            values_.push_back(at.value);
            children_.push_back(0);
        }
        return push(n);
    }
    std::uint32_t add_kind(const Mixture& k) {
        std::vector<std::uint32_t> kids;
        for (const auto& c : k.components) kids.push_back(add(c.dist));
        Node n{Kind::choice, false, static_cast<std::uint32_t>(weights_.size()),
               static_cast<std::uint32_t>(kids.size()), 0.0, 0.0};
        for (std::size_t j = 0; j < kids.size(); ++j) {
            weights_.push_back(k.components[j].weight);
            values_.push_back(0.0);
            children_.push_back(kids[j]);
        }
        return push(n);
    }
    std::uint32_t add_kind(const Difference& k) {
        const std::uint32_t z = add(*k.minuend);
        const std::uint32_t t = add(*k.subtrahend);
        Node n{Kind::difference, false, static_cast<std::uint32_t>(weights_.size()), 2, k.scale, 0.0};
        for (std::uint32_t c : {z, t}) {
            weights_.push_back(0.0);
            values_.push_back(0.0);
            children_.push_back(c);
        }
        return push(n);
    }

    std::vector<Node> nodes_;
    std::vector<double> weights_;
    std::vector<double> values_;
    std::vector<std::uint32_t> children_;
};

// Laws for indices 1..horizon, compiled once and shared read-only by workers.
class LawTable {
public:
    LawTable(const SequenceSpec& seq, std::size_t horizon) {
        if (const auto* p = seq.periodic_rule()) {
            pre_ = p->preperiod.size();
            len_ = p->cycle.size();
            for (const auto& d : p->preperiod) roots_.push_back(flat_.add(d));
            for (const auto& d : p->cycle) roots_.push_back(flat_.add(d));
        } else {
            // Parametric laws are usually distinct per index; equal neighbours
            // (the common case for point masses) share one compiled node.
            for (std::size_t i = 1; i <= horizon; ++i) {
                const Distribution& d = seq.at(i);
                if (i > 1 && d == seq.at(i - 1)) {
                    roots_.push_back(roots_.back());
                } else {
                    roots_.push_back(flat_.add(d));
                }
            }
            pre_ = horizon;
            len_ = 1;
        }
    }

    double draw(std::size_t i, RandomStream& stream) const {
        const std::size_t k = i <= pre_ ? i - 1 : pre_ + (i - 1 - pre_) % len_;
        return flat_.draw(roots_[k], stream);
    }

private:
    FlatLaws flat_;
    std::vector<std::uint32_t> roots_;
    std::size_t pre_ = 0;
    std::size_t len_ = 1;
};

// Runs `trial(index, stream)` for every trial and sums the returned per-grid
// hit vectors. Trials are split into contiguous blocks per worker.
template <class Trial>
std::vector<std::uint64_t> run_trials(std::size_t trials, std::size_t grid, std::uint64_t seed,
                                      const Trial& trial) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(thread_count(), trials));
    std::vector<std::vector<std::uint64_t>> partial(workers, std::vector<std::uint64_t>(grid, 0));
    auto work = [&](unsigned w) {
        const std::size_t begin = trials * w / workers;
        const std::size_t end = trials * (w + 1) / workers;
        for (std::size_t t = begin; t < end; ++t) {
            auto stream = RandomStream::substream(seed, t);
            trial(stream, partial[w]);
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    std::vector<std::uint64_t> hits(grid, 0);
    for (const auto& p : partial) {
        for (std::size_t j = 0; j < grid; ++j) hits[j] += p[j];
    }
    return hits;
}

inline std::vector<SimulationEstimate> to_estimates(const std::vector<double>& grid,
                                                    const std::vector<std::uint64_t>& hits,
                                                    const SimulationPlan& plan) {
    std::vector<SimulationEstimate> out;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out.push_back(make_estimate(grid[j], hits[j], plan.trials, plan.confidence_level));
    }
    return out;
}

// Records a hit for every threshold the running maximum exceeded.
inline void record(double running_max, const std::vector<double>& sorted, std::vector<std::uint64_t>& hits) {
    for (std::size_t j = 0; j < sorted.size() && running_max > sorted[j]; ++j) ++hits[j];
}

} // namespace detail

// One pass per trial serves every threshold in the grid (common random
// numbers), so estimates are nonincreasing along the grid. A trial stops
// early once the largest threshold is exceeded.
inline std::vector<SimulationEstimate> simulate_sup_grid(const SequenceSpec& seq,
                                                         std::vector<double> grid,
                                                         const SimulationPlan& plan) {
    plan.validate();
    if (grid.empty()) throw spec_error("simulation: threshold grid is empty");
    std::sort(grid.begin(), grid.end());
    const detail::LawTable laws(seq, plan.horizon);
    const double top = grid.back();
    const auto hits = detail::run_trials(
        plan.trials, grid.size(), plan.seed, [&](RandomStream& stream, std::vector<std::uint64_t>& h) {
            double s = 0.0;
            double best = 0.0;
            for (std::size_t i = 1; i <= plan.horizon; ++i) {
                s += laws.draw(i, stream);
                if (s > best) {
                    best = s;
                    if (best > top) break;
                }
            }
            detail::record(best, grid, h);
        });
    return detail::to_estimates(grid, hits, plan);
}

inline SimulationEstimate simulate_sup(const SequenceSpec& seq, const SimulationPlan& plan) {
    return simulate_sup_grid(seq, {plan.threshold}, plan).front();
}

// Ruin estimates over a grid of initial surpluses u. With a time horizon T,
// only claims arriving by time T count (psi(u, T)); otherwise the horizon is
// a claim count.
inline std::vector<SimulationEstimate> simulate_ruin_grid(const RiskModelSpec& m,
                                                          std::vector<double> grid,
                                                          const SimulationPlan& plan) {
    plan.validate();
    m.validate();
    if (grid.empty()) throw spec_error("simulation: threshold grid is empty");
    for (double u : grid) {
        if (!(u >= 0.0)) throw spec_error("simulation: initial surplus u must be >= 0");
    }
    if (!plan.time_horizon) return simulate_sup_grid(to_increment_sequence(m), std::move(grid), plan);

    std::sort(grid.begin(), grid.end());
    const detail::LawTable claims(m.claims, plan.horizon);
    const detail::LawTable inter(m.interarrivals, plan.horizon);
    const double top = grid.back();
    const double t_max = *plan.time_horizon;
    const auto hits = detail::run_trials(
        plan.trials, grid.size(), plan.seed, [&](RandomStream& stream, std::vector<std::uint64_t>& h) {
            double s = 0.0;
            double best = 0.0;
            double clock = 0.0;
            for (std::size_t i = 1; i <= plan.horizon; ++i) {
                // Same draw order as the increment walk: claim, then waiting time.
                const double z = claims.draw(i, stream);
                const double theta = inter.draw(i, stream);
                clock += theta;
                if (clock > t_max) break;
                s += z - m.p * theta;
                if (s > best) {
                    best = s;
                    if (best > top) break;
                }
            }
            detail::record(best, grid, h);
        });
    return detail::to_estimates(grid, hits, plan);
}

inline SimulationEstimate simulate_ruin(const RiskModelSpec& m, double u, const SimulationPlan& plan) {
    return simulate_ruin_grid(m, {u}, plan).front();
}

struct DominationRow {
    SimulationEstimate estimate;
    double bound = 1.0;
    double margin = 0.0;  // bound - ci_low
    bool pass = true;
};

struct DominationReport {
    std::vector<DominationRow> rows;
    bool all_pass = true;
};

namespace detail {

inline DominationReport compare(const std::vector<SimulationEstimate>& est, const BoundCertificate& cert) {
    DominationReport rep;
    for (const auto& e : est) {
        DominationRow row{e, cert.bound(e.threshold), 0.0, true};
        row.margin = row.bound - e.ci_low;
        row.pass = e.ci_low <= row.bound;
        rep.all_pass = rep.all_pass && row.pass;
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace detail

// A failing row means the certified bound lies below a confident lower
// estimate of the probability: a bug, since the bound is a theorem.
inline DominationReport bound_domination_report(const SequenceSpec& seq, const BoundCertificate& cert,
                                                const std::vector<double>& grid,
                                                const SimulationPlan& plan) {
    return detail::compare(simulate_sup_grid(seq, grid, plan), cert);
}

inline DominationReport bound_domination_report(const RiskModelSpec& m, const BoundCertificate& cert,
                                                const std::vector<double>& grid,
                                                const SimulationPlan& plan) {
    return detail::compare(simulate_ruin_grid(m, grid, plan), cert);
}

// The walk maximum typically occurs within O(x/a) steps; warn when the
// horizon is shorter than ten times that.
inline std::optional<std::string> horizon_advisory(double a, double threshold, std::size_t horizon) {
    if (!(a > 0.0)) return std::nullopt;
    const double needed = 10.0 * threshold / a;
    if (static_cast<double>(horizon) >= needed) return std::nullopt;
    std::ostringstream msg;
    msg << "horizon " << horizon << " is below 10 x / a = " << needed
        << "; the finite-horizon estimate may understate P(sup S_n > " << threshold << ")";
    return msg.str();
}

} // namespace rwbound
