#include "seiv/closure.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "seiv/error.hpp"
#include "seiv/integrator.hpp"
#include "seiv/io.hpp"

namespace seiv {

const char* to_string(ClosureKind k) { return k == ClosureKind::Crude ? "crude" : "refined"; }

BoundsState BoundsState::indicator(const SystemState& x) {
    BoundsState b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        b.lower(i, x[i]) = 1.0;
        b.upper(i, x[i]) = 1.0;
    }
    return b;
}

ClosureSystem::ClosureSystem(ClosureKind kind, const SpreadingGraph& g, const SpreadingParams& p)
    : kind_(kind), alpha_(p.alpha), xi_(p.xi), delta_(p.delta), eta_(p.eta) {
    p.validate(g);
    offsets_.assign(g.size() + 1, 0);
    for (NodeId i = 0; i < g.size(); ++i) {
        auto nb = g.in_neighbors(i);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const auto id = g.in_begin(i) + k;
            if (p.beta[id] == 0.0 && p.gamma[id] == 0.0) continue;
            src_.push_back(nb[k]);
            beta_.push_back(p.beta[id]);
            gamma_.push_back(p.gamma[id]);
        }
        offsets_[i + 1] = static_cast<std::uint32_t>(src_.size());
    }
}

ClosureSystem ClosureSystem::restricted(std::span<const NodeId> keep) const {
    ClosureSystem out;
    out.kind_ = kind_;
    std::vector<std::int64_t> remap(size(), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) remap[keep[k]] = static_cast<std::int64_t>(k);
    out.offsets_.assign(keep.size() + 1, 0);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const NodeId i = keep[k];
        out.alpha_.push_back(alpha_[i]);
        out.xi_.push_back(xi_[i]);
        out.delta_.push_back(delta_[i]);
        out.eta_.push_back(eta_[i]);
        for (auto e = offsets_[i]; e < offsets_[i + 1]; ++e) {
            if (remap[src_[e]] < 0) continue;
            out.src_.push_back(static_cast<std::uint32_t>(remap[src_[e]]));
            out.beta_.push_back(beta_[e]);
            out.gamma_.push_back(gamma_[e]);
        }
        out.offsets_[k + 1] = static_cast<std::uint32_t>(out.src_.size());
    }
    return out;
}

namespace {
inline double fl(double y, double z) { return std::max(0.0, y + z - 1.0); }
inline double fu(double y, double z) { return std::min(y, z); }
} // namespace

void ClosureSystem::derivative(std::span<const double> x, std::span<double> dx) const {
    constexpr std::size_t W = BoundsState::kStride;
    const bool refined = kind_ == ClosureKind::Refined;
    const std::size_t n = size();
    const double* xs = x.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = xs + i * W;
        const double loS = xi[0], loE = xi[1], loI = xi[2], loV = xi[3];
        const double upS = xi[4], upE = xi[5], upI = xi[6], upV = xi[7];
        // Upper-E inflow argument: up_S, or min{1 - up_E, up_S} when refined.
        const double upS_in = refined ? complement_bound(upE, upS) : upS;

        double upS_loss = 0.0, loS_loss = 0.0, upE_gain = 0.0, loE_gain = 0.0;
        for (auto e = offsets_[i]; e < offsets_[i + 1]; ++e) {
            const double* xj = xs + std::size_t{src_[e]} * W;
            const double loEj = xj[1], loIj = xj[2], upEj = xj[5], upIj = xj[6];
            const double b = beta_[e], g = gamma_[e];
            upS_loss += b * fl(upS, loEj) + g * fl(upS, loIj);
            loS_loss += b * fu(loS, upEj) + g * fu(loS, upIj);
            upE_gain += b * fu(upS_in, upEj) + g * fu(upS_in, upIj);
            loE_gain += b * fl(loS, loEj) + g * fl(loS, loIj);
        }

        const double a = alpha_[i], xr = xi_[i], d = delta_[i], h = eta_[i];
        double* out = dx.data() + i * W;
        out[0] = a * loV - xr * loS - loS_loss;
        out[1] = loE_gain - d * loE;
        out[2] = d * loE - h * loI;
        out[3] = h * loI + xr * loS - a * loV;
        if (refined) {
            out[4] = a * complement_bound(upS, upV) - xr * upS - upS_loss;
            out[5] = upE_gain - d * upE;
            out[6] = d * complement_bound(upI, upE) - h * upI;
            out[7] = h * complement_bound(upV, upI) + xr * complement_bound(upV, upS) - a * upV;
        } else {
            out[4] = a * upV - xr * upS - upS_loss;
            out[5] = upE_gain - d * upE;
            out[6] = d * upE - h * upI;
            out[7] = h * upI + xr * upS - a * upV;
        }
    }
}

namespace {

BoundsState evaluate_rhs(ClosureKind kind, const SpreadingGraph& g, const SpreadingParams& p,
                         const BoundsState& state) {
    if (state.size() != g.size()) {
        throw ValidationError("bounds state has " + std::to_string(state.size()) + " nodes, graph has " +
                              std::to_string(g.size()));
    }
    ClosureSystem sys(kind, g, p);
    BoundsState d(g.size());
    sys.derivative(state.data(), d.data());
    return d;
}

// Post-step projection. Refined bounds are clamped into [0,1]; crossings or
// leaks larger than `slack` are reported rather than repaired.
void enforce_invariants(ClosureKind kind, std::span<double> x, double slack, double t) {
    constexpr std::size_t W = BoundsState::kStride;
    const std::size_t n = x.size() / W;
    for (std::size_t i = 0; i < n; ++i) {
        double* xi = x.data() + i * W;
        for (std::size_t c = 0; c < kCompartments; ++c) {
            double& lo = xi[c];
            double& up = xi[kCompartments + c];
            if (!std::isfinite(lo) || !std::isfinite(up)) {
                throw NumericalError("non-finite bound at node " + std::to_string(i) + ", t=" + std::to_string(t));
            }
            if (kind == ClosureKind::Refined) {
                if (lo < -slack || up > 1.0 + slack) {
                    throw NumericalError("refined bound left [0,1] beyond slack at node " + std::to_string(i) +
                                         ", t=" + std::to_string(t));
                }
                lo = std::max(lo, 0.0);
                up = std::min(up, 1.0);
            }
            if (lo > up) {
                if (lo > up + slack) {
                    throw NumericalError("lower bound exceeds upper bound at node " + std::to_string(i) +
                                         ", compartment " + to_char(static_cast<Compartment>(c)) +
                                         ", t=" + std::to_string(t));
                }
                lo = up;
            }
        }
    }
}

} // namespace

BoundsState crude_rhs(const SpreadingGraph& g, const SpreadingParams& p, const BoundsState& state) {
    return evaluate_rhs(ClosureKind::Crude, g, p, state);
}

BoundsState refined_rhs(const SpreadingGraph& g, const SpreadingParams& p, const BoundsState& state) {
    return evaluate_rhs(ClosureKind::Refined, g, p, state);
}

BoundsTrajectory integrate_bounds(const ClosureSystem& sys, const BoundsState& start, double duration,
                                  const IntegrationOptions& opts) {
    if (start.size() != sys.size()) throw ValidationError("bounds state does not match closure system size");
    const std::size_t steps = step_count(duration, opts.step);
    const double h = steps > 0 ? duration / static_cast<double>(steps) : 0.0;

    BoundsTrajectory traj;
    if (opts.record) traj.reserve(steps + 1);
    BoundsState x = start;
    if (opts.record) traj.push_back({0.0, x});

    Rk4 rk(x.data().size());
    auto rhs = [&](std::span<const double> y, std::span<double> dy) {
        sys.derivative(y, dy);
        if (opts.derivative_hook) opts.derivative_hook(y, dy);
    };
    for (std::size_t k = 1; k <= steps; ++k) {
        rk.step(rhs, x.data(), h);
        const double t = (k == steps) ? duration : h * static_cast<double>(k);
        enforce_invariants(sys.kind(), x.data(), opts.slack, t);
        if (opts.record) traj.push_back({t, x});
    }
    if (!opts.record) traj.push_back({duration, std::move(x)});
    return traj;
}

BoundsTrajectory integrate_bounds(ClosureKind kind, const SpreadingGraph& g, const SpreadingParams& p,
                                  const SystemState& x0, double duration, double step) {
    if (!(step > 0.0)) throw ValidationError("integrate_bounds: step must be > 0");
    if (x0.size() != g.size()) throw ValidationError("initial state does not match graph size");
    ClosureSystem sys(kind, g, p);
    IntegrationOptions opts;
    opts.step = step;
    return integrate_bounds(sys, BoundsState::indicator(x0), duration, opts);
}

double optimal_exposed_infected_upper(const BoundsState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double direct = b.upper(i, Compartment::E) + b.upper(i, Compartment::I);
        const double complement = 1.0 - b.lower(i, Compartment::S) - b.lower(i, Compartment::V);
        s += std::min(direct, complement);
    }
    return s;
}

double naive_exposed_infected_upper(const BoundsState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += b.upper(i, Compartment::E) + b.upper(i, Compartment::I);
    return s;
}

double optimal_exposed_infected_lower(const BoundsState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double direct = b.lower(i, Compartment::E) + b.lower(i, Compartment::I);
        const double complement = 1.0 - b.upper(i, Compartment::S) - b.upper(i, Compartment::V);
        s += std::max(direct, complement);
    }
    return s;
}

void write_bounds_csv(std::ostream& os, const BoundsTrajectory& traj) {
    os << "time,node,lo_S,up_S,lo_E,up_E,lo_I,up_I,lo_V,up_V\n";
    for (const auto& sample : traj) {
        for (std::size_t i = 0; i < sample.state.size(); ++i) {
            os << format_double(sample.time) << ',' << i;
            for (auto c : kAllCompartments) {
                os << ',' << format_double(sample.state.lower(i, c)) << ',' << format_double(sample.state.upper(i, c));
            }
            os << '\n';
        }
    }
}

} // namespace seiv
