#include "fsl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

#include "fsl/lp.hpp"

namespace fsl {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Union support of mu - nu: exactly coinciding atoms are coalesced and the
/// signed weight difference attached. Atoms whose net coefficient is zero are
/// dropped; in a metric space they can only act as Lipschitz relays, which
/// the triangle inequality makes redundant.
struct SignedSupport {
    Eigen::MatrixXd atoms;  // d x n
    Eigen::VectorXd coeff;  // mu weight minus nu weight
};

SignedSupport signed_support(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("bl/tv: measures have different dimensions");
    std::map<std::vector<double>, double> acc;
    auto add = [&](const DiscreteMeasure& m, double sign) {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            std::vector<double> key(m.atoms().col(i).data(),
                                    m.atoms().col(i).data() + m.dim());
            acc[key] += sign * m.weights()[i];
        }
    };
    add(mu, +1.0);
    add(nu, -1.0);

    std::vector<const std::vector<double>*> keys;
    std::vector<double> coeffs;
    for (const auto& [key, c] : acc) {
        if (c == 0.0) continue;
        keys.push_back(&key);
        coeffs.push_back(c);
    }
    SignedSupport s;
    s.atoms.resize(mu.dim(), static_cast<Eigen::Index>(keys.size()));
    s.coeff.resize(static_cast<Eigen::Index>(keys.size()));
    for (std::size_t i = 0; i < keys.size(); ++i) {
        for (Eigen::Index j = 0; j < mu.dim(); ++j)
            s.atoms(j, static_cast<Eigen::Index>(i)) = (*keys[i])[static_cast<std::size_t>(j)];
        s.coeff[static_cast<Eigen::Index>(i)] = coeffs[i];
    }
    return s;
}

/// Exact solve of the 1-d program
///   max sum_i c_i f(x_i),  |f| <= 1,  |f(x_i) - f(x_j)| <= |x_i - x_j|.
/// After sorting, only adjacent constraints bind (distances add along the
/// line), and the optimum is computed by propagating the concave piecewise
/// linear value function V_i(f) = best objective of the prefix given
/// f(x_i) = f. The transition is a sliding-window maximum, which preserves
/// concavity and adds at most one flat piece per atom.
double chain_bl(std::vector<std::pair<double, double>> atoms /* (x, c) sorted */) {
    std::vector<double> bx = {-1.0, 1.0};
    std::vector<double> bv = {-atoms[0].second, atoms[0].second};

    std::vector<double> nbx, nbv, cbx, cbv;
    auto eval = [](const std::vector<double>& xs, const std::vector<double>& vs, double f) {
        auto it = std::lower_bound(xs.begin(), xs.end(), f);
        std::size_t hi = static_cast<std::size_t>(it - xs.begin());
        if (hi == 0) return vs.front();
        if (hi >= xs.size()) return vs.back();
        const std::size_t lo = hi - 1;
        const double span = xs[hi] - xs[lo];
        if (span <= 0.0) return vs[lo];
        const double w = (f - xs[lo]) / span;
        return vs[lo] * (1.0 - w) + vs[hi] * w;
    };

    for (std::size_t i = 1; i < atoms.size(); ++i) {
        const double gap = atoms[i].first - atoms[i - 1].first;
        const double vmax = *std::max_element(bv.begin(), bv.end());
        std::size_t first = 0, last = 0;
        for (std::size_t k = 0; k < bv.size(); ++k)
            if (bv[k] == vmax) {
                last = k;
            }
        for (std::size_t k = bv.size(); k-- > 0;)
            if (bv[k] == vmax) {
                first = k;
            }

        // Sliding-window maximum over |f' - f| <= gap.
        nbx.clear();
        nbv.clear();
        for (std::size_t k = 0; k <= first; ++k) {
            nbx.push_back(bx[k] - gap);
            nbv.push_back(bv[k]);
        }
        nbx.push_back(bx[last] + gap);
        nbv.push_back(vmax);
        for (std::size_t k = last + 1; k < bx.size(); ++k) {
            nbx.push_back(bx[k] + gap);
            nbv.push_back(bv[k]);
        }

        // Clip the domain back to [-1, 1].
        cbx.clear();
        cbv.clear();
        cbx.push_back(-1.0);
        cbv.push_back(eval(nbx, nbv, -1.0));
        for (std::size_t k = 0; k < nbx.size(); ++k) {
            if (nbx[k] > -1.0 && nbx[k] < 1.0) {
                cbx.push_back(nbx[k]);
                cbv.push_back(nbv[k]);
            }
        }
        cbx.push_back(1.0);
        cbv.push_back(eval(nbx, nbv, 1.0));

        // Add the new atom's linear contribution c_i * f.
        const double c = atoms[i].second;
        for (std::size_t k = 0; k < cbx.size(); ++k) cbv[k] += c * cbx[k];
        bx = cbx;
        bv = cbv;
    }
    return *std::max_element(bv.begin(), bv.end());
}

/// Dense pair formulation for d >= 2, substituting g = f + 1 in [0, 2] so the
/// simplex starts from the slack basis. Pair constraints are generated
/// lazily: at an optimum the active set is a forest, so the working program
/// stays near-linear in the number of atoms.
double simplex_bl(const SignedSupport& s) {
    const Eigen::Index n = s.atoms.cols();
    if (n <= 1) return 0.0;

    Eigen::MatrixXd dist(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            dist(i, j) = (s.atoms.col(i) - s.atoms.col(j)).norm();

    std::set<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            if (dist(i, j) < bd) {
                bd = dist(i, j);
                best = j;
            }
        }
        pairs.insert(std::minmax(i, best));
    }

    const int max_rounds = 500;
    for (int round = 0; round < max_rounds; ++round) {
        const Eigen::Index m = n + 2 * static_cast<Eigen::Index>(pairs.size());
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < n; ++i) {
            A(i, i) = 1.0;
            b[i] = 2.0;
        }
        Eigen::Index r = n;
        for (const auto& [i, j] : pairs) {
            A(r, i) = 1.0;
            A(r, j) = -1.0;
            b[r] = dist(i, j);
            ++r;
            A(r, i) = -1.0;
            A(r, j) = 1.0;
            b[r] = dist(i, j);
            ++r;
        }
        const LpSolution sol = simplex_maximize(s.coeff, A, b);

        // Collect violated pair constraints.
        std::vector<std::tuple<double, Eigen::Index, Eigen::Index>> violated;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = std::abs(sol.x[i] - sol.x[j]) - dist(i, j);
                if (v > 1e-9 && !pairs.count({i, j})) violated.emplace_back(v, i, j);
            }
        if (violated.empty()) return sol.objective - s.coeff.sum();
        std::sort(violated.rbegin(), violated.rend());
        const std::size_t take = std::min<std::size_t>(violated.size(), 2 * static_cast<std::size_t>(n));
        for (std::size_t k = 0; k < take; ++k)
            pairs.insert({std::get<1>(violated[k]), std::get<2>(violated[k])});
    }
    throw Error("bl_distance_exact: constraint generation did not converge");
}

}  // namespace

double bl_distance_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                         Eigen::Index support_cap) {
    const SignedSupport s = signed_support(mu, nu);
    if (s.atoms.cols() == 0) return 0.0;
    if (s.atoms.cols() > support_cap)
        throw SupportTooLarge("bl_distance_exact: union support " +
                              std::to_string(s.atoms.cols()) + " exceeds cap " +
                              std::to_string(support_cap));
    if (mu.dim() == 1) {
        std::vector<std::pair<double, double>> atoms;
        atoms.reserve(static_cast<std::size_t>(s.atoms.cols()));
        for (Eigen::Index i = 0; i < s.atoms.cols(); ++i)
            atoms.emplace_back(s.atoms(0, i), s.coeff[i]);
        std::sort(atoms.begin(), atoms.end());
        return chain_bl(std::move(atoms));
    }
    return simplex_bl(s);
}

namespace detail {

double bl_via_simplex(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const SignedSupport s = signed_support(mu, nu);
    if (s.atoms.cols() == 0) return 0.0;
    return simplex_bl(s);
}

double bl_via_chain(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dim() != 1) throw std::invalid_argument("bl_via_chain: requires d == 1");
    const SignedSupport s = signed_support(mu, nu);
    if (s.atoms.cols() == 0) return 0.0;
    std::vector<std::pair<double, double>> atoms;
    for (Eigen::Index i = 0; i < s.atoms.cols(); ++i)
        atoms.emplace_back(s.atoms(0, i), s.coeff[i]);
    std::sort(atoms.begin(), atoms.end());
    return chain_bl(std::move(atoms));
}

}  // namespace detail

PartitionOfUnity::PartitionOfUnity(double alpha_, int dim_) : alpha(alpha_), dim(dim_) {
    if (alpha <= 0.0) throw std::invalid_argument("PartitionOfUnity: alpha must be positive");
    if (dim < 1) throw std::invalid_argument("PartitionOfUnity: dim must be >= 1");
}

namespace {
double phi_factor(double u, int k) {
    const double t = u - static_cast<double>(k);
    if (std::abs(t) > 1.0) return 0.0;
    const double c = std::cos(0.5 * kPi * t);
    return c * c;
}
}  // namespace

double PartitionOfUnity::member(const Eigen::VectorXi& k, const Eigen::VectorXd& x) const {
    return partition_member_eval(k, alpha, x);
}

std::vector<Eigen::VectorXi> PartitionOfUnity::active_members(const Eigen::VectorXd& x) const {
    std::vector<std::vector<int>> axis(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
        const double u = alpha * x[j];
        const int lo = static_cast<int>(std::ceil(u - 1.0));
        const int hi = static_cast<int>(std::floor(u + 1.0));
        for (int k = lo; k <= hi; ++k) axis[static_cast<std::size_t>(j)].push_back(k);
    }
    std::vector<Eigen::VectorXi> out;
    std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
    while (true) {
        Eigen::VectorXi k(dim);
        for (int j = 0; j < dim; ++j)
            k[j] = axis[static_cast<std::size_t>(j)][idx[static_cast<std::size_t>(j)]];
        out.push_back(k);
        int j = dim - 1;
        while (j >= 0) {
            if (++idx[static_cast<std::size_t>(j)] < axis[static_cast<std::size_t>(j)].size()) break;
            idx[static_cast<std::size_t>(j)] = 0;
            --j;
        }
        if (j < 0) break;
    }
    return out;
}

double PartitionOfUnity::lipschitz_bound() const {
    return 0.5 * alpha * kPi * std::sqrt(static_cast<double>(dim));
}

double partition_member_eval(const Eigen::VectorXi& k, double alpha, const Eigen::VectorXd& x) {
    if (k.size() != x.size())
        throw std::invalid_argument("partition_member_eval: index/point dimension mismatch");
    double prod = 1.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        prod *= phi_factor(alpha * x[j], k[j]);
        if (prod == 0.0) return 0.0;
    }
    return prod;
}

double bl_upper_partition(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double alpha) {
    if (mu.dim() != nu.dim())
        throw std::invalid_argument("bl_upper_partition: dimension mismatch");
    PartitionOfUnity pou(alpha, static_cast<int>(mu.dim()));
    std::map<std::vector<int>, std::pair<double, double>> integrals;
    auto accumulate = [&](const DiscreteMeasure& m, bool into_first) {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const Eigen::VectorXd x = m.atom(i);
            for (const Eigen::VectorXi& k : pou.active_members(x)) {
                const double v = pou.member(k, x);
                if (v == 0.0) continue;
                std::vector<int> key(k.data(), k.data() + k.size());
                auto& slot = integrals[key];
                (into_first ? slot.first : slot.second) += m.weights()[i] * v;
            }
        }
    };
    accumulate(mu, true);
    accumulate(nu, false);
    double sum = 0.0;
    for (const auto& [key, v] : integrals) sum += std::abs(v.first - v.second);
    const double bound = 2.0 * std::sqrt(static_cast<double>(mu.dim())) / alpha + sum;
    return std::min(2.0, bound);
}

double bl_lower_random(const DiscreteMeasure& mu, const DiscreteMeasure& nu, int trials,
                       RngStream& rng) {
    if (trials < 1) throw std::invalid_argument("bl_lower_random: trials must be >= 1");
    // Working on the coalesced signed support keeps identical measures at an
    // exact zero instead of accumulating cancellation noise.
    const SignedSupport s = signed_support(mu, nu);
    if (s.atoms.cols() == 0) return 0.0;
    const Eigen::Index d = mu.dim();
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
        Eigen::VectorXd u(d);
        if (d == 1) {
            u[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
        } else {
            do {
                u = rng.gauss_vector(d);
            } while (u.norm() < 1e-12);
            u /= u.norm();
        }
        const Eigen::VectorXd proj = s.atoms.transpose() * u;
        const double reach = proj.cwiseAbs().maxCoeff() + 1.0;
        const double c = (2.0 * rng.uniform() - 1.0) * reach;
        double gap = 0.0;
        for (Eigen::Index i = 0; i < proj.size(); ++i)
            gap += s.coeff[i] * std::clamp(proj[i] + c, -1.0, 1.0);
        best = std::max(best, std::abs(gap));
    }
    return best;
}

double tv_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    const SignedSupport s = signed_support(mu, nu);
    return s.coeff.cwiseAbs().sum();
}

double tv_convolved(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                    const GaussianNoise& xi, const QuadratureSpec& grid) {
    const Eigen::Index d = mu.dim();
    if (nu.dim() != d || xi.dim() != d)
        throw std::invalid_argument("tv_convolved: dimension mismatch");
    if (d > 2) throw std::invalid_argument("tv_convolved: only d <= 2 supported");
    GaussianDensity dens(xi);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(xi.covariance(), Eigen::EigenvaluesOnly);
    const double sigma_max = std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));
    const double pad = grid.padding_sigmas * sigma_max;

    Eigen::VectorXd lo(d), hi(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double amin = std::min(mu.atoms().row(j).minCoeff(), nu.atoms().row(j).minCoeff());
        const double amax = std::max(mu.atoms().row(j).maxCoeff(), nu.atoms().row(j).maxCoeff());
        lo[j] = amin + xi.mean()[j] - pad;
        hi[j] = amax + xi.mean()[j] + pad;
    }

    int n = std::max(3, grid.nodes_per_axis);
    if (n % 2 == 0) ++n;
    auto simpson_weight = [n](int i) {
        if (i == 0 || i == n - 1) return 1.0;
        return (i % 2 == 1) ? 4.0 : 2.0;
    };
    auto density_diff = [&](const Eigen::VectorXd& y) {
        double p = 0.0, q = 0.0;
        for (Eigen::Index i = 0; i < mu.size(); ++i)
            p += mu.weights()[i] * dens.density(y - mu.atom(i));
        for (Eigen::Index i = 0; i < nu.size(); ++i)
            q += nu.weights()[i] * dens.density(y - nu.atom(i));
        return std::abs(p - q);
    };

    if (d == 1) {
        const double h = (hi[0] - lo[0]) / (n - 1);
        double acc = 0.0;
        Eigen::VectorXd y(1);
        for (int i = 0; i < n; ++i) {
            y[0] = lo[0] + h * i;
            acc += simpson_weight(i) * density_diff(y);
        }
        return acc * h / 3.0;
    }

    const double hx = (hi[0] - lo[0]) / (n - 1);
    const double hy = (hi[1] - lo[1]) / (n - 1);
    double acc = 0.0;
    Eigen::VectorXd y(2);
    for (int i = 0; i < n; ++i) {
        y[0] = lo[0] + hx * i;
        double row = 0.0;
        for (int j = 0; j < n; ++j) {
            y[1] = lo[1] + hy * j;
            row += simpson_weight(j) * density_diff(y);
        }
        acc += simpson_weight(i) * row;
    }
    return acc * hx * hy / 9.0;
}

std::string MetricReport::csv_row(double t) const {
    char buf[200];
    if (exact_bl) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g", t, *exact_bl, bl_upper,
                      bl_lower, tv);
    } else {
        std::snprintf(buf, sizeof(buf), "%.17g,,%.17g,%.17g,%.17g", t, bl_upper, bl_lower, tv);
    }
    return buf;
}

MetricReport metric_report(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const MetricOptions& opts, RngStream& rng) {
    MetricReport rep;
    try {
        rep.exact_bl = bl_distance_exact(mu, nu, opts.support_cap);
    } catch (const SupportTooLarge&) {
        rep.exact_bl = std::nullopt;
    }
    rep.bl_upper = 2.0;
    for (double a : opts.upper_alphas)
        rep.bl_upper = std::min(rep.bl_upper, bl_upper_partition(mu, nu, a));
    rep.bl_lower = bl_lower_random(mu, nu, opts.lower_trials, rng);
    rep.tv = tv_discrete(mu, nu);
    return rep;
}

}  // namespace fsl
