#include "fsl/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fsl/errors.hpp"

namespace fsl {

namespace {

ObservabilityReport rank_by_svd(const Eigen::MatrixXd& m, Eigen::Index full, double tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    ObservabilityReport rep;
    rep.singular_values = svd.singularValues();
    rep.tolerance = tol;
    const double top = rep.singular_values.size() ? rep.singular_values[0] : 0.0;
    for (Eigen::Index i = 0; i < rep.singular_values.size(); ++i)
        if (rep.singular_values[i] > tol * top) ++rep.rank;
    rep.observable = (rep.rank == static_cast<int>(full));
    return rep;
}

}  // namespace

ObservabilityReport observability_matrix_rank(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                              double tol) {
    if (A.rows() != A.cols()) throw std::invalid_argument("observability_matrix_rank: A not square");
    if (C.cols() != A.rows()) throw std::invalid_argument("observability_matrix_rank: C col mismatch");
    if (!(tol > 0.0 && tol < 1.0))
        throw std::invalid_argument("observability_matrix_rank: tol must be in (0,1)");
    const Eigen::Index d = A.rows();
    const Eigen::Index q = C.rows();
    Eigen::MatrixXd stacked(d * q, d);
    Eigen::MatrixXd block = C;
    for (Eigen::Index i = 0; i < d; ++i) {
        stacked.middleRows(i * q, q) = block;
        block = block * A;
    }
    return rank_by_svd(stacked, d, tol);
}

ReconstructionResult reconstruction_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C,
                                           const std::vector<double>& times, double tol) {
    if (times.empty()) throw std::invalid_argument("reconstruction_matrix: needs at least one time");
    for (double t : times)
        if (!(t > 0.0)) throw std::invalid_argument("reconstruction_matrix: times must be positive");
    const Eigen::Index d = A.rows();
    const Eigen::Index q = C.rows();
    ReconstructionResult res;
    res.stacked.resize(static_cast<Eigen::Index>(times.size()) * q, d);
    for (std::size_t i = 0; i < times.size(); ++i)
        res.stacked.middleRows(static_cast<Eigen::Index>(i) * q, q) = C * integral_exp(A, times[i]);
    res.rank_report = rank_by_svd(res.stacked, d, tol);
    if (res.rank_report.observable) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(res.stacked,
                                              Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        Eigen::VectorXd inv_sv(sv.size());
        for (Eigen::Index k = 0; k < sv.size(); ++k)
            inv_sv[k] = sv[k] > tol * sv[0] ? 1.0 / sv[k] : 0.0;
        res.reconstruction =
            svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
    }
    return res;
}

BiLipschitzDecomposition bilipschitz_decompose_1d(const std::function<double(double)>& h,
                                                  const std::vector<double>& probe_grid) {
    if (probe_grid.size() < 1000)
        throw std::invalid_argument("bilipschitz_decompose_1d: probe grid needs >= 1000 points");
    for (std::size_t i = 0; i + 1 < probe_grid.size(); ++i)
        if (!(probe_grid[i + 1] > probe_grid[i]))
            throw std::invalid_argument("bilipschitz_decompose_1d: grid must be increasing");

    std::vector<double> values(probe_grid.size());
    for (std::size_t i = 0; i < probe_grid.size(); ++i) values[i] = h(probe_grid[i]);

    double slope_min = std::numeric_limits<double>::infinity();
    double slope_max = -std::numeric_limits<double>::infinity();
    int sign = 0;
    for (std::size_t i = 0; i + 1 < probe_grid.size(); ++i) {
        const double q = (values[i + 1] - values[i]) / (probe_grid[i + 1] - probe_grid[i]);
        const int s = q > 0.0 ? 1 : (q < 0.0 ? -1 : 0);
        if (s == 0) throw NotMonotone("bilipschitz_decompose_1d: flat increment on the grid");
        if (sign == 0) sign = s;
        if (s != sign)
            throw NotMonotone("bilipschitz_decompose_1d: increments change sign near x = " +
                              std::to_string(probe_grid[i]));
        slope_min = std::min(slope_min, std::abs(q));
        slope_max = std::max(slope_max, std::abs(q));
    }

    BiLipschitzDecomposition dec;
    dec.slope_min = slope_min;
    dec.slope_max = slope_max;
    dec.C = (sign > 0 ? 1.0 : -1.0) * 0.5 * (slope_max + slope_min);
    dec.eps = (slope_max - slope_min) / (slope_max + slope_min);
    double lip_h0 = 0.0;
    for (std::size_t i = 0; i + 1 < probe_grid.size(); ++i) {
        const double dx = probe_grid[i + 1] - probe_grid[i];
        const double dh0 = (values[i + 1] - dec.C * probe_grid[i + 1]) -
                           (values[i] - dec.C * probe_grid[i]);
        lip_h0 = std::max(lip_h0, std::abs(dh0 / dx) / std::abs(dec.C));
    }
    dec.grid_lip_h0 = lip_h0;
    dec.valid = slope_min > 0.0 && dec.eps < 1.0 && lip_h0 <= dec.eps + 1e-12;
    return dec;
}

BiLipschitzDecomposition bilipschitz_decompose_1d(const std::function<double(double)>& h,
                                                  double lo, double hi, int points) {
    if (!(hi > lo)) throw std::invalid_argument("bilipschitz_decompose_1d: empty interval");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    return bilipschitz_decompose_1d(h, grid);
}

SandwichConstants lemma51_constants(double lip_Ch0, double lip_b, double norm_Cinv, double lip_h,
                                    double eps) {
    if (!(lip_Ch0 < 1.0)) throw InvalidModel("lemma51_constants: requires ||C^{-1}h0||_L < 1");
    if (lip_Ch0 < 0.0 || lip_b < 0.0 || !(norm_Cinv > 0.0) || lip_h < 0.0 || eps < 0.0)
        throw std::invalid_argument("lemma51_constants: negative input");

    auto lower_at = [&](double e) {
        const double g = std::exp(lip_b * e);
        return (1.0 - lip_Ch0 * g - 0.5 * lip_b * e * g) / norm_Cinv;
    };
    SandwichConstants sc;
    sc.eps = eps;
    sc.lower = lower_at(eps);
    sc.upper = lip_h * std::exp(lip_b * eps);
    if (lip_b == 0.0) {
        sc.eps0 = std::numeric_limits<double>::infinity();
        return sc;
    }
    double hi = 1.0;
    while (lower_at(hi) > 0.0) hi *= 2.0;
    double lo = 0.0;
    while ((hi - lo) > 1e-8 * hi) {
        const double mid = 0.5 * (lo + hi);
        (lower_at(mid) > 0.0 ? lo : hi) = mid;
    }
    sc.eps0 = 0.5 * (lo + hi);
    return sc;
}

Eigen::VectorXd windowed_observation(const DiffusionModel& model, const Eigen::VectorXd& x,
                                     double eps, int subintervals) {
    if (subintervals % 2 != 0) ++subintervals;
    const double h = eps / subintervals;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(model.state_dim());
    Eigen::VectorXd y = x;
    for (int i = 0; i <= subintervals; ++i) {
        const double w = (i == 0 || i == subintervals) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * model.h(y);
        if (i < subintervals) y = eta_flow(model.b, y, h, 1);
    }
    return acc * (h / 3.0) / eps;
}

SandwichCheckReport verify_sandwich(const DiffusionModel& model, double eps, int pair_count,
                                    const Eigen::VectorXd& box_lo, const Eigen::VectorXd& box_hi,
                                    RngStream& rng) {
    const SandwichConstants sc = lemma51_constants(model.lip_Cinv_h0, model.lip_b,
                                                   model.norm_Cinv(), model.lip_h(), eps);
    if (!(eps < sc.eps0))
        throw std::invalid_argument("verify_sandwich: eps must be below eps0");

    SandwichCheckReport rep;
    rep.constants = sc;
    rep.worst_low_ratio = std::numeric_limits<double>::infinity();
    rep.worst_high_ratio = 0.0;
    rep.pairs = pair_count;
    const Eigen::Index d = model.state_dim();
    for (int p = 0; p < pair_count; ++p) {
        Eigen::VectorXd x(d), y(d);
        do {
            for (Eigen::Index j = 0; j < d; ++j) {
                x[j] = box_lo[j] + (box_hi[j] - box_lo[j]) * rng.uniform();
                y[j] = box_lo[j] + (box_hi[j] - box_lo[j]) * rng.uniform();
            }
        } while ((x - y).norm() < 1e-8);
        const double dist = (x - y).norm();
        const double hdist = (windowed_observation(model, x, eps) -
                              windowed_observation(model, y, eps))
                                 .norm();
        const double ratio = hdist / dist;
        rep.worst_low_ratio = std::min(rep.worst_low_ratio, ratio);
        rep.worst_high_ratio = std::max(rep.worst_high_ratio, ratio);
        // Relative slack absorbs quadrature/stepper roundoff when a ratio
        // sits exactly on a constant (e.g. h = id gives ratio = m = M = 1).
        if (ratio < sc.lower * (1.0 - 1e-9) - 1e-12 ||
            ratio > sc.upper * (1.0 + 1e-9) + 1e-12) {
            std::ostringstream msg;
            msg << "verify_sandwich: ratio " << ratio << " outside [" << sc.lower << ", "
                << sc.upper << "] for pair x = " << x.transpose() << ", y = " << y.transpose();
            throw SandwichViolated(msg.str());
        }
    }
    return rep;
}

FlowDeviationReport verify_flow_deviation(const DiffusionModel& model,
                                          const std::vector<double>& check_times, int mc_paths,
                                          const std::vector<Eigen::VectorXd>& probe_points,
                                          double dt, RngStream& rng) {
    if (probe_points.empty())
        throw std::invalid_argument("verify_flow_deviation: needs at least one probe point");
    if (check_times.empty())
        throw std::invalid_argument("verify_flow_deviation: needs at least one check time");
    const double horizon = *std::max_element(check_times.begin(), check_times.end());
    FlowDeviationReport rep;
    rep.bound = std::exp(model.lip_b * horizon) * std::sqrt(model.trace_bound * horizon);
    rep.paths = mc_paths;

    for (std::size_t pi = 0; pi < probe_points.size(); ++pi) {
        const Eigen::VectorXd& x0 = probe_points[pi];
        for (std::size_t ci = 0; ci < check_times.size(); ++ci) {
            const double s = check_times[ci];
            const auto steps = static_cast<Eigen::Index>(std::llround(s / dt));
            if (steps < 1 || std::abs(steps * dt - s) > 1e-9)
                throw std::invalid_argument("verify_flow_deviation: dt must divide each check time");
            // The deterministic flow is advanced with the same Euler grid as
            // the simulated paths, so the measured deviation is purely the
            // diffusion contribution that the bound controls (sigma = 0 gives
            // exactly zero).
            Eigen::VectorXd eta = x0;
            for (Eigen::Index k = 0; k < steps; ++k) eta += model.b(eta) * dt;
            double sum = 0.0, sumsq = 0.0;
            for (int p = 0; p < mc_paths; ++p) {
                RngStream path_rng = rng.fork(static_cast<std::uint64_t>(pi) * 1000003ULL +
                                              static_cast<std::uint64_t>(ci) * 1009ULL +
                                              static_cast<std::uint64_t>(p));
                auto [sig, obs] = simulate_diffusion(model, x0, s, dt, path_rng);
                const double dev = (sig.states.col(steps) - eta).norm();
                sum += dev;
                sumsq += dev * dev;
            }
            const double mean = sum / mc_paths;
            const double var = std::max(0.0, sumsq / mc_paths - mean * mean);
            const double se = std::sqrt(var / mc_paths);
            if (mean > rep.worst_estimate) {
                rep.worst_estimate = mean;
                rep.worst_std_error = se;
                rep.worst_time = s;
            }
            const double bound_s = std::exp(model.lip_b * s) * std::sqrt(model.trace_bound * s);
            if (mean > bound_s + 3.0 * se) {
                std::ostringstream msg;
                msg << "verify_flow_deviation: estimate " << mean << " exceeds bound " << bound_s
                    << " + 3se at s = " << s;
                throw BoundViolated(msg.str());
            }
        }
    }
    return rep;
}

}  // namespace fsl
