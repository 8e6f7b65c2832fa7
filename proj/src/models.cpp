#include "fsl/models.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "fsl/errors.hpp"

namespace fsl {

namespace {

Eigen::Index grid_steps(double T, double dt) {
    if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("simulate: T and dt must be positive");
    const double steps = T / dt;
    const auto k = static_cast<Eigen::Index>(std::llround(steps));
    if (std::abs(steps - static_cast<double>(k)) > 1e-9 * std::max(1.0, steps) || k < 1)
        throw std::invalid_argument("simulate: dt must divide T");
    return k;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

}  // namespace

LinearGaussianModel::LinearGaussianModel(Eigen::MatrixXd A_, Eigen::MatrixXd B_,
                                         Eigen::MatrixXd C_, Eigen::MatrixXd D_)
    : A(std::move(A_)), B(std::move(B_)), C(std::move(C_)), D(std::move(D_)) {
    if (A.rows() != A.cols()) throw std::invalid_argument("LinearGaussianModel: A not square");
    if (B.rows() != A.rows()) throw std::invalid_argument("LinearGaussianModel: B row mismatch");
    if (C.cols() != A.rows()) throw std::invalid_argument("LinearGaussianModel: C col mismatch");
    if (D.rows() != C.rows()) throw std::invalid_argument("LinearGaussianModel: D row mismatch");
}

LinearGaussianModel LinearGaussianModel::scalar(double a, double b, double c, double d) {
    auto m = [](double v) { return Eigen::MatrixXd::Constant(1, 1, v); };
    return LinearGaussianModel(m(a), m(b), m(c), m(d));
}

DiffusionModel::DiffusionModel(VectorFn b_, double lip_b_, MatrixFn sigma_, double trace_bound_,
                               Eigen::MatrixXd C_, VectorFn h0_, double lip_Cinv_h0_,
                               Eigen::MatrixXd D_)
    : b(std::move(b_)),
      lip_b(lip_b_),
      sigma(std::move(sigma_)),
      trace_bound(trace_bound_),
      C(std::move(C_)),
      h0(std::move(h0_)),
      lip_Cinv_h0(lip_Cinv_h0_),
      D(std::move(D_)) {
    if (C.rows() != C.cols()) throw InvalidModel("DiffusionModel: C must be square");
    if (std::abs(C.determinant()) < 1e-12) throw InvalidModel("DiffusionModel: C not invertible");
    if (!(lip_Cinv_h0 < 1.0))
        throw InvalidModel("DiffusionModel: requires ||C^{-1} h0||_L < 1");
    if (lip_b < 0.0 || trace_bound < 0.0)
        throw InvalidModel("DiffusionModel: negative declared constant");
}

double DiffusionModel::norm_Cinv() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    return 1.0 / svd.singularValues().minCoeff();
}

double DiffusionModel::lip_h() const {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    const double norm_C = svd.singularValues().maxCoeff();
    // ||h||_L <= ||C|| + ||h0||_L and ||h0||_L <= ||C|| ||C^{-1} h0||_L.
    return norm_C * (1.0 + lip_Cinv_h0);
}

Example12Model::Example12Model(double lambda_) : lambda(lambda_) {
    if (!(lambda > 0.0)) throw InvalidModel("Example12Model: lambda must be positive");
}

double Example12Model::drift_increment(double x0, double t, double dt) const {
    return (std::exp(-lambda * t) - std::exp(-lambda * (t + dt))) / (lambda * x0);
}

DiscreteChainModel::DiscreteChainModel(KernelFn kernel_, ObsFn h_, GaussianNoise xi_)
    : kernel(std::move(kernel_)), h(std::move(h_)), xi(std::move(xi_)) {}

FiniteHMM::FiniteHMM(Eigen::MatrixXd transition_, Eigen::MatrixXd emission_)
    : transition(std::move(transition_)), emission(std::move(emission_)) {
    if (transition.rows() != transition.cols())
        throw InvalidModel("FiniteHMM: transition must be square");
    if (emission.rows() != transition.rows())
        throw InvalidModel("FiniteHMM: emission row mismatch");
    auto check_stochastic = [](const Eigen::MatrixXd& m, const char* what) {
        if (m.minCoeff() < 0.0) throw InvalidModel(std::string("FiniteHMM: ") + what + " has negative entry");
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            if (std::abs(m.row(i).sum() - 1.0) > 1e-12)
                throw InvalidModel(std::string("FiniteHMM: ") + what + " row does not sum to 1");
    };
    check_stochastic(transition, "transition");
    check_stochastic(emission, "emission");
}

ObservationPath::ObservationPath(Eigen::VectorXd times_, Eigen::MatrixXd values_)
    : times(std::move(times_)), values(std::move(values_)) {
    if (times.size() != values.cols())
        throw std::invalid_argument("ObservationPath: grid/value size mismatch");
    if (times.size() < 1 || times[0] != 0.0)
        throw std::invalid_argument("ObservationPath: grid must start at t = 0");
    if (values.col(0).cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("ObservationPath: Y_0 must be 0");
    for (Eigen::Index k = 0; k + 1 < times.size(); ++k)
        if (!(times[k + 1] > times[k]))
            throw std::invalid_argument("ObservationPath: grid not strictly increasing");
}

std::uint64_t ObservationPath::content_hash() const {
    auto fnv = [](const double* data, Eigen::Index n, std::uint64_t h) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(data);
        for (Eigen::Index i = 0; i < n * static_cast<Eigen::Index>(sizeof(double)); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
        return h;
    };
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv(times.data(), times.size(), h);
    h = fnv(values.data(), values.size(), h);
    return h;
}

Eigen::VectorXd draw_prior(const Prior& prior, RngStream& rng) {
    if (const auto* g = std::get_if<GaussianMeasure>(&prior))
        return sample(*g, 1, rng).col(0);
    return sample(std::get<DiscreteMeasure>(prior), 1, rng).col(0);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_lti(const Eigen::MatrixXd& A,
                                                           const Eigen::MatrixXd& B, double dt) {
    const Eigen::Index d = A.rows();
    // exp([[A, BB^T], [0, -A^T]] dt) = [[Phi, E], [0, Phi^{-T}]] with
    // Q = E Phi^T.
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    H.topLeftCorner(d, d) = A;
    H.topRightCorner(d, d) = B * B.transpose();
    H.bottomRightCorner(d, d) = -A.transpose();
    const Eigen::MatrixXd E = (H * dt).exp();
    Eigen::MatrixXd phi = E.topLeftCorner(d, d);
    Eigen::MatrixXd Q = E.topRightCorner(d, d) * phi.transpose();
    Q = 0.5 * (Q + Q.transpose());
    return {phi, Q};
}

Eigen::MatrixXd integral_exp(const Eigen::MatrixXd& A, double t) {
    const Eigen::Index d = A.rows();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    H.topLeftCorner(d, d) = A;
    H.topRightCorner(d, d) = Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd E = (H * t).exp();
    return E.topRightCorner(d, d);
}

std::pair<SignalPath, ObservationPath> simulate_linear_gaussian(const LinearGaussianModel& model,
                                                                const Prior& prior, double T,
                                                                double dt, RngStream& rng) {
    const Eigen::Index K = grid_steps(T, dt);
    const Eigen::Index d = model.state_dim();
    const Eigen::Index q = model.obs_dim();

    const auto [phi, Q] = discretize_lti(model.A, model.B, dt);
    const Eigen::MatrixXd L = psd_sqrt(Q);
    const double sqrt_dt = std::sqrt(dt);

    SignalPath sig;
    sig.times.resize(K + 1);
    sig.states.resize(d, K + 1);
    Eigen::MatrixXd obs(q, K + 1);
    obs.col(0).setZero();

    Eigen::VectorXd x = draw_prior(prior, rng);
    if (x.size() != d) throw std::invalid_argument("simulate_linear_gaussian: prior dimension mismatch");
    sig.states.col(0) = x;
    sig.times[0] = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
        obs.col(k + 1) = obs.col(k) + model.C * x * dt +
                         model.D * (sqrt_dt * rng.gauss_vector(model.D.cols()));
        x = phi * x + L * rng.gauss_vector(d);
        sig.states.col(k + 1) = x;
        sig.times[k + 1] = dt * static_cast<double>(k + 1);
    }
    ObservationPath path(sig.times, std::move(obs));
    return {std::move(sig), std::move(path)};
}

std::pair<SignalPath, ObservationPath> simulate_diffusion(const DiffusionModel& model,
                                                          const Eigen::VectorXd& x0, double T,
                                                          double dt, RngStream& rng) {
    if (dt > 0.1 / std::max(1.0, model.lip_b))
        throw std::invalid_argument("simulate_diffusion: dt too large for declared ||b||_L");
    const Eigen::Index K = grid_steps(T, dt);
    const Eigen::Index q = model.state_dim();
    const double sqrt_dt = std::sqrt(dt);

    SignalPath sig;
    sig.times.resize(K + 1);
    sig.states.resize(q, K + 1);
    Eigen::MatrixXd obs(q, K + 1);
    obs.col(0).setZero();

    Eigen::VectorXd x = x0;
    sig.states.col(0) = x;
    sig.times[0] = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
        obs.col(k + 1) = obs.col(k) + model.h(x) * dt +
                         model.D * (sqrt_dt * rng.gauss_vector(model.D.cols()));
        const Eigen::MatrixXd s = model.sigma(x);
        x = x + model.b(x) * dt + s * (sqrt_dt * rng.gauss_vector(s.cols()));
        if (!x.allFinite())
            throw NonFiniteState("simulate_diffusion: state left the representable range at step " +
                                 std::to_string(k + 1));
        sig.states.col(k + 1) = x;
        sig.times[k + 1] = dt * static_cast<double>(k + 1);
    }
    ObservationPath path(sig.times, std::move(obs));
    return {std::move(sig), std::move(path)};
}

ObservationPath simulate_example12(const Example12Model& model, double x0, double T, double dt,
                                   RngStream& rng, bool with_noise) {
    if (!(x0 >= 1.0)) throw std::invalid_argument("simulate_example12: x0 must be >= 1");
    const Eigen::Index K = grid_steps(T, dt);
    Eigen::VectorXd times(K + 1);
    Eigen::MatrixXd obs(1, K + 1);
    obs(0, 0) = 0.0;
    times[0] = 0.0;
    const double sqrt_dt = std::sqrt(dt);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double t = dt * static_cast<double>(k);
        double inc = model.drift_increment(x0, t, dt);
        if (with_noise) inc += sqrt_dt * rng.gauss();
        obs(0, k + 1) = obs(0, k) + inc;
        times[k + 1] = dt * static_cast<double>(k + 1);
    }
    return ObservationPath(std::move(times), std::move(obs));
}

Eigen::VectorXd eta_flow(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& b,
                         const Eigen::VectorXd& x, double t, int substeps) {
    if (t < 0.0) throw std::invalid_argument("eta_flow: t must be >= 0");
    if (substeps < 1) throw std::invalid_argument("eta_flow: substeps must be >= 1");
    if (t == 0.0) return x;
    const double h = t / substeps;
    Eigen::VectorXd y = x;
    for (int k = 0; k < substeps; ++k) {
        const Eigen::VectorXd k1 = b(y);
        const Eigen::VectorXd k2 = b(y + 0.5 * h * k1);
        const Eigen::VectorXd k3 = b(y + 0.5 * h * k2);
        const Eigen::VectorXd k4 = b(y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> step_discrete_chain(const DiscreteChainModel& model,
                                                                const Eigen::VectorXd& x,
                                                                RngStream& rng) {
    Eigen::VectorXd next = model.kernel(x, rng);
    Eigen::VectorXd y = model.h(next) + model.xi.draw(rng);
    return {std::move(next), std::move(y)};
}

}  // namespace fsl
