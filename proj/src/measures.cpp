#include "fsl/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace fsl {

namespace {

constexpr double kWeightSumTol = 1e-12;
constexpr double kSymTol = 1e-10;
constexpr double kPsdTol = -1e-10;

void check_covariance(const Eigen::MatrixXd& cov, const char* what) {
    if (cov.rows() != cov.cols()) throw std::invalid_argument(std::string(what) + ": covariance not square");
    const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale)
        throw std::invalid_argument(std::string(what) + ": covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()),
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < kPsdTol * scale)
        throw std::invalid_argument(std::string(what) + ": covariance not positive semidefinite");
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(Eigen::MatrixXd atoms, Eigen::VectorXd weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.cols() != weights_.size())
        throw std::invalid_argument("DiscreteMeasure: atoms/weights length mismatch");
    if (atoms_.cols() < 1) throw std::invalid_argument("DiscreteMeasure: needs at least one atom");
    if (weights_.minCoeff() < 0.0)
        throw std::invalid_argument("DiscreteMeasure: negative weight");
    if (std::abs(weights_.sum() - 1.0) > kWeightSumTol)
        throw std::invalid_argument("DiscreteMeasure: weights do not sum to 1");
}

DiscreteMeasure DiscreteMeasure::dirac(const Eigen::VectorXd& x) {
    Eigen::MatrixXd a(x.size(), 1);
    a.col(0) = x;
    return DiscreteMeasure(a, Eigen::VectorXd::Ones(1));
}

DiscreteMeasure DiscreteMeasure::dirac1d(double x) {
    return dirac(Eigen::VectorXd::Constant(1, x));
}

DiscreteMeasure DiscreteMeasure::from_raw_weights(Eigen::MatrixXd atoms,
                                                  const Eigen::VectorXd& raw) {
    return DiscreteMeasure(std::move(atoms), normalize(raw));
}

DiscreteMeasure DiscreteMeasure::from_log_weights(Eigen::MatrixXd atoms,
                                                  const Eigen::VectorXd& logw) {
    return DiscreteMeasure(std::move(atoms), normalize_log(logw));
}

DiscreteMeasure DiscreteMeasure::from_points1d(const std::vector<double>& xs,
                                               const std::vector<double>& ws) {
    Eigen::MatrixXd atoms(1, static_cast<Eigen::Index>(xs.size()));
    Eigen::VectorXd weights(static_cast<Eigen::Index>(ws.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) atoms(0, static_cast<Eigen::Index>(i)) = xs[i];
    for (std::size_t i = 0; i < ws.size(); ++i) weights[static_cast<Eigen::Index>(i)] = ws[i];
    return DiscreteMeasure(std::move(atoms), std::move(weights));
}

double DiscreteMeasure::integrate(
    const std::function<double(const Eigen::VectorXd&)>& f) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < size(); ++i) acc += weights_[i] * f(atoms_.col(i));
    return acc;
}

Eigen::VectorXd DiscreteMeasure::mean() const { return atoms_ * weights_; }

Eigen::MatrixXd DiscreteMeasure::covariance() const {
    const Eigen::VectorXd m = mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim(), dim());
    for (Eigen::Index i = 0; i < size(); ++i) {
        const Eigen::VectorXd c = atoms_.col(i) - m;
        cov += weights_[i] * c * c.transpose();
    }
    return cov;
}

std::string DiscreteMeasure::to_csv() const {
    std::ostringstream out;
    for (Eigen::Index j = 0; j < dim(); ++j) out << "atom_" << j << ",";
    out << "weight\n";
    for (Eigen::Index i = 0; i < size(); ++i) {
        for (Eigen::Index j = 0; j < dim(); ++j) out << format_double(atoms_(j, i)) << ",";
        out << format_double(weights_[i]) << "\n";
    }
    return out.str();
}

DiscreteMeasure DiscreteMeasure::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("DiscreteMeasure: empty CSV");
    const Eigen::Index d = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<Eigen::Index>(row.size()) != d + 1)
            throw std::invalid_argument("DiscreteMeasure: ragged CSV row");
        rows.push_back(std::move(row));
    }
    Eigen::MatrixXd atoms(d, static_cast<Eigen::Index>(rows.size()));
    Eigen::VectorXd weights(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) atoms(j, static_cast<Eigen::Index>(i)) = rows[i][static_cast<std::size_t>(j)];
        weights[static_cast<Eigen::Index>(i)] = rows[i].back();
    }
    return DiscreteMeasure(std::move(atoms), std::move(weights));
}

GaussianMeasure::GaussianMeasure(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
    if (cov_.rows() != mean_.size())
        throw std::invalid_argument("GaussianMeasure: dimension mismatch");
    check_covariance(cov_, "GaussianMeasure");
}

Eigen::MatrixXd GaussianMeasure::sqrt_covariance() const { return psd_sqrt(cov_); }

GaussianNoise::GaussianNoise(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), cov_(std::move(covariance)) {
    if (cov_.rows() != mean_.size())
        throw std::invalid_argument("GaussianNoise: dimension mismatch");
    check_covariance(cov_, "GaussianNoise");
}

GaussianNoise GaussianNoise::standard(Eigen::Index d) {
    return GaussianNoise(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
}

GaussianNoise GaussianNoise::scalar(double mean, double variance) {
    return GaussianNoise(Eigen::VectorXd::Constant(1, mean),
                         Eigen::MatrixXd::Constant(1, 1, variance));
}

Eigen::VectorXd GaussianNoise::draw(RngStream& rng) const {
    return mean_ + psd_sqrt(cov_) * rng.gauss_vector(dim());
}

GaussianDensity::GaussianDensity(const GaussianNoise& noise) : mean_(noise.mean()) {
    Eigen::LLT<Eigen::MatrixXd> llt(noise.covariance());
    if (llt.info() != Eigen::Success)
        throw SingularNoise("GaussianDensity: covariance is not invertible");
    chol_lower_ = llt.matrixL();
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < chol_lower_.rows(); ++i)
        log_det += std::log(chol_lower_(i, i));
    const double d = static_cast<double>(mean_.size());
    log_norm_ = -0.5 * d * std::log(2.0 * 3.14159265358979323846) - log_det;
}

double GaussianDensity::log_density(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z =
        chol_lower_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_norm_ - 0.5 * z.squaredNorm();
}

Eigen::VectorXd normalize(const Eigen::VectorXd& raw_weights) {
    if (raw_weights.size() == 0) throw std::invalid_argument("normalize: empty weights");
    if (raw_weights.minCoeff() < 0.0)
        throw std::invalid_argument("normalize: negative weight");
    const double total = raw_weights.sum();
    if (!(total > 0.0)) throw AllWeightsZero("normalize: all weights are zero");
    return raw_weights / total;
}

Eigen::VectorXd normalize_log(const Eigen::VectorXd& log_weights) {
    if (log_weights.size() == 0) throw std::invalid_argument("normalize_log: empty weights");
    const double m = log_weights.maxCoeff();
    if (!std::isfinite(m))
        throw AllWeightsZero("normalize_log: all log-weights are -inf");
    Eigen::VectorXd w = (log_weights.array() - m).exp();
    return w / w.sum();
}

DiscreteMeasure pushforward(
    const DiscreteMeasure& mu,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
    const Eigen::VectorXd first = f(mu.atom(0));
    Eigen::MatrixXd atoms(first.size(), mu.size());
    atoms.col(0) = first;
    for (Eigen::Index i = 1; i < mu.size(); ++i) atoms.col(i) = f(mu.atom(i));
    return DiscreteMeasure(std::move(atoms), mu.weights());
}

Eigen::MatrixXd sample(const DiscreteMeasure& mu, Eigen::Index n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    Eigen::VectorXd cum(mu.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        acc += mu.weights()[i];
        cum[i] = acc;
    }
    cum[mu.size() - 1] = 1.0;
    Eigen::MatrixXd out(mu.dim(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double u = rng.uniform();
        const double* begin = cum.data();
        const double* pos = std::upper_bound(begin, begin + cum.size(), u);
        Eigen::Index idx = std::min<Eigen::Index>(pos - begin, mu.size() - 1);
        out.col(k) = mu.atoms().col(idx);
    }
    return out;
}

Eigen::MatrixXd sample(const GaussianMeasure& mu, Eigen::Index n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    const Eigen::MatrixXd L = mu.sqrt_covariance();
    Eigen::MatrixXd out(mu.dim(), n);
    for (Eigen::Index k = 0; k < n; ++k)
        out.col(k) = mu.mean() + L * rng.gauss_vector(mu.dim());
    return out;
}

double convolved_density(const DiscreteMeasure& mu, const GaussianNoise& xi,
                         const Eigen::VectorXd& y) {
    GaussianDensity dens(xi);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        acc += mu.weights()[i] * dens.density(y - mu.atom(i));
    return acc;
}

GaussianNoise reflect(const GaussianNoise& xi) {
    return GaussianNoise(-xi.mean(), xi.covariance());
}

}  // namespace fsl
