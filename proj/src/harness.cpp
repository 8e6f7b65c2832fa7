#include "fsl/harness.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

namespace fsl {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

DiscreteMeasure cloud_measure(const Eigen::MatrixXd& atoms) {
    return DiscreteMeasure(atoms, Eigen::VectorXd::Constant(
                                      atoms.cols(), 1.0 / static_cast<double>(atoms.cols())));
}

StabilityRecord make_record(double t, const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                            const MetricOptions& opts, RngStream&& rng) {
    MetricReport rep = metric_report(mu, nu, opts, rng);
    StabilityRecord rec;
    rec.t = t;
    rec.bl_exact = rep.exact_bl.has_value();
    rec.bl = rep.exact_bl ? *rep.exact_bl : rep.bl_upper;
    rec.bl_upper = rep.bl_upper;
    rec.bl_lower = rep.bl_lower;
    rec.tv = rep.tv;
    rec.mean_gap = (mu.mean() - nu.mean()).norm();
    rec.aux = (mu.covariance() - nu.covariance()).norm();
    return rec;
}

}  // namespace

std::vector<std::string> StabilityTrace::csv_columns() {
    return {"t", "bl", "bl_upper", "bl_lower", "tv", "mean_gap", "aux"};
}

std::string StabilityTrace::to_csv() const {
    CsvWriter csv(csv_columns());
    for (const auto& r : records)
        csv.append_row({CsvWriter::cell(r.t), CsvWriter::cell(r.bl), CsvWriter::cell(r.bl_upper),
                        CsvWriter::cell(r.bl_lower), CsvWriter::cell(r.tv),
                        CsvWriter::cell(r.mean_gap), CsvWriter::cell(r.aux)});
    return csv.str();
}

DiscreteMeasure sigma_quantile_atoms(const GaussianMeasure& g, int n_quantile) {
    const Eigen::Index d = g.dim();
    if (d > 3)
        throw std::invalid_argument("sigma_quantile_atoms: supported for d <= 3");
    const Eigen::MatrixXd L = g.sqrt_covariance();
    const Eigen::Index n = 2 * d + 1 + n_quantile;
    Eigen::MatrixXd atoms(d, n);
    Eigen::Index col = 0;
    atoms.col(col++) = g.mean();
    const double spread = std::sqrt(3.0);
    for (Eigen::Index j = 0; j < d; ++j) {
        atoms.col(col++) = g.mean() + spread * L.col(j);
        atoms.col(col++) = g.mean() - spread * L.col(j);
    }
    static const std::uint64_t bases[3] = {2, 3, 5};
    for (int k = 1; k <= n_quantile; ++k) {
        Eigen::VectorXd z(d);
        for (Eigen::Index j = 0; j < d; ++j)
            z[j] = gauss_cdf_inv(van_der_corput(static_cast<std::uint64_t>(k),
                                                bases[static_cast<std::size_t>(j)]));
        atoms.col(col++) = g.mean() + L * z;
    }
    return cloud_measure(atoms);
}

// ---------------------------------------------------------------------------
// Kalman stability
// ---------------------------------------------------------------------------

StabilityTrace run_stability_kalman_seed(const KalmanStabilityConfig& cfg, long seed) {
    RngStream rng(static_cast<std::uint64_t>(seed));
    RngStream path_rng = rng.fork(1);
    const ObservationPath path =
        simulate_linear_gaussian(cfg.model, cfg.prior_mu, cfg.T, cfg.dt, path_rng).second;

    const std::vector<KalmanState> run_mu = kalman_bucy_run(cfg.model, cfg.prior_mu, path);
    const std::vector<KalmanState> run_nu = kalman_bucy_run(cfg.model, cfg.prior_nu, path);

    const auto stride = static_cast<Eigen::Index>(std::llround(cfg.cadence / cfg.dt));
    if (stride < 1 || std::abs(stride * cfg.dt - cfg.cadence) > 1e-9)
        throw ConfigError("stability: cadence must be a multiple of dt");

    StabilityTrace trace;
    trace.seed = seed;
    trace.path_hash = path.content_hash();
    trace.path_hash_mu = trace.path_hash;
    trace.path_hash_nu = trace.path_hash;
    trace.bl_mode = "exact";
    for (std::size_t k = 0; k < run_mu.size(); k += static_cast<std::size_t>(stride)) {
        const DiscreteMeasure mu_atoms = sigma_quantile_atoms(
            GaussianMeasure(run_mu[k].mean, run_mu[k].cov), cfg.quantile_atoms);
        const DiscreteMeasure nu_atoms = sigma_quantile_atoms(
            GaussianMeasure(run_nu[k].mean, run_nu[k].cov), cfg.quantile_atoms);
        StabilityRecord rec = make_record(run_mu[k].t, mu_atoms, nu_atoms, cfg.metrics,
                                          rng.fork(1000 + static_cast<std::uint64_t>(k)));
        // For Kalman runs the exact posterior gaps are the primary decay
        // certificate; overwrite the cloud statistics with them.
        rec.mean_gap = (run_mu[k].mean - run_nu[k].mean).norm();
        rec.aux = (run_mu[k].cov - run_nu[k].cov).norm();
        if (!rec.bl_exact) trace.bl_mode = "bounds";
        trace.records.push_back(rec);
    }
    return trace;
}

std::vector<StabilityTrace> run_stability_kalman(const KalmanStabilityConfig& cfg) {
    std::vector<StabilityTrace> out(cfg.seeds.size());
    parallel_for_index(cfg.seeds.size(), [&](std::size_t i) {
        out[i] = run_stability_kalman_seed(cfg, cfg.seeds[i]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Particle stability
// ---------------------------------------------------------------------------

StabilityTrace run_stability_particle_seed(const ParticleStabilityConfig& cfg, long seed) {
    RngStream rng(static_cast<std::uint64_t>(seed));
    RngStream path_rng = rng.fork(1);
    const Eigen::VectorXd x0 = draw_prior(cfg.prior_mu, path_rng);
    const ObservationPath path = simulate_diffusion(cfg.model, x0, cfg.T, cfg.dt, path_rng).second;

    const auto stride = static_cast<Eigen::Index>(std::llround(cfg.cadence / cfg.dt));
    if (stride < 1 || std::abs(stride * cfg.dt - cfg.cadence) > 1e-9)
        throw ConfigError("stability: cadence must be a multiple of dt");

    // Both filters share one filter stream: identical priors then give
    // identical clouds, and different priors are positively coupled.
    auto collect = [&](const Prior& prior) {
        RngStream filter_rng = rng.fork(2);
        std::vector<DiscreteMeasure> clouds;
        Eigen::Index k = 0;
        particle_filter_run(cfg.model, prior, path, cfg.particles, filter_rng,
                            [&](const ParticleState& st) {
                                if (k % stride == 0) clouds.push_back(st.measure);
                                ++k;
                            });
        return clouds;
    };
    const std::vector<DiscreteMeasure> clouds_mu = collect(cfg.prior_mu);
    const std::vector<DiscreteMeasure> clouds_nu = collect(cfg.prior_nu);

    StabilityTrace trace;
    trace.seed = seed;
    trace.path_hash = path.content_hash();
    trace.path_hash_mu = trace.path_hash;
    trace.path_hash_nu = trace.path_hash;
    trace.bl_mode = "exact";
    for (std::size_t k = 0; k < clouds_mu.size(); ++k) {
        const double t = cfg.cadence * static_cast<double>(k);
        StabilityRecord rec = make_record(t, clouds_mu[k], clouds_nu[k], cfg.metrics,
                                          rng.fork(1000 + static_cast<std::uint64_t>(k)));
        if (!rec.bl_exact) trace.bl_mode = "bounds";
        trace.records.push_back(rec);
    }
    return trace;
}

std::vector<StabilityTrace> run_stability_particle(const ParticleStabilityConfig& cfg) {
    std::vector<StabilityTrace> out(cfg.seeds.size());
    parallel_for_index(cfg.seeds.size(), [&](std::size_t i) {
        out[i] = run_stability_particle_seed(cfg, cfg.seeds[i]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Example 1.2 counterexample
// ---------------------------------------------------------------------------

CounterexampleResult run_counterexample_seed(const CounterexampleConfig& cfg, long seed) {
    const Example12Model model(cfg.lambda);
    const double period = kTwoPi / cfg.lambda;
    const auto per = static_cast<Eigen::Index>(std::ceil(period / cfg.dt_target));
    const double dt = period / static_cast<double>(per);
    const double T = period * cfg.n_max;

    RngStream rng(static_cast<std::uint64_t>(seed));
    RngStream prior_rng = rng.fork(1);
    const double x0 = sample(cfg.prior_mu, 1, prior_rng)(0, 0);
    RngStream path_rng = rng.fork(2);
    const ObservationPath path = simulate_example12(model, x0, T, dt, path_rng);

    const auto f = [](double x) { return std::cos(std::log(x)); };

    CounterexampleResult res;
    res.seed = seed;
    for (int n = 1; n <= cfg.n_max; ++n) {
        const double tn = path.times[static_cast<Eigen::Index>(n) * per];
        const DiscreteMeasure post_mu = grid_filter_example12(model, cfg.prior_mu, path, tn);
        const DiscreteMeasure post_nu = grid_filter_example12(model, cfg.prior_nu, path, tn);
        auto f_vec = [&f](const Eigen::VectorXd& x) { return f(x[0]); };
        res.gap.push_back(post_mu.integrate(f_vec) - post_nu.integrate(f_vec));
    }

    // Truncated Z = int_0^T e^{-lambda s} dY_s; the neglected tail has drift
    // at most e^{-lambda T} / lambda and noise variance e^{-2 lambda T} / (2 lambda).
    double Z = 0.0;
    for (Eigen::Index k = 0; k < path.steps(); ++k)
        Z += std::exp(-cfg.lambda * path.times[k]) * path.increment(k)[0];
    res.gap_limit = limit_posterior_example12(cfg.prior_mu, Z, cfg.lambda, f) -
                    limit_posterior_example12(cfg.prior_nu, Z, cfg.lambda, f);

    res.residual = 0.0;
    for (int n = cfg.settle_n; n <= cfg.n_max; ++n)
        res.residual = std::max(res.residual,
                                std::abs(res.gap[static_cast<std::size_t>(n - 1)] - res.gap_limit));
    return res;
}

std::vector<CounterexampleResult> run_counterexample(const CounterexampleConfig& cfg) {
    std::vector<CounterexampleResult> out(cfg.seeds.size());
    parallel_for_index(cfg.seeds.size(), [&](std::size_t i) {
        out[i] = run_counterexample_seed(cfg, cfg.seeds[i]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Predictor merging
// ---------------------------------------------------------------------------

StabilityTrace run_predictor_merging_seed(const PredictorMergingConfig& cfg, long seed) {
    RngStream rng(static_cast<std::uint64_t>(seed));

    // The two predictors share prior-sampling and update streams, so equal
    // priors produce identical clouds and the trace is exactly zero.
    RngStream prior_rng_mu = rng.fork(1);
    RngStream prior_rng_nu = rng.fork(1);
    DiscreteMeasure pi_mu = cloud_measure([&] {
        if (const auto* g = std::get_if<GaussianMeasure>(&cfg.prior_mu))
            return sample(*g, cfg.particles, prior_rng_mu);
        return sample(std::get<DiscreteMeasure>(cfg.prior_mu), cfg.particles, prior_rng_mu);
    }());
    DiscreteMeasure pi_nu = cloud_measure([&] {
        if (const auto* g = std::get_if<GaussianMeasure>(&cfg.prior_nu))
            return sample(*g, cfg.particles, prior_rng_nu);
        return sample(std::get<DiscreteMeasure>(cfg.prior_nu), cfg.particles, prior_rng_nu);
    }());

    RngStream signal_rng = rng.fork(2);
    Eigen::VectorXd x = draw_prior(cfg.prior_mu, signal_rng);

    StabilityTrace trace;
    trace.seed = seed;
    trace.bl_mode = "exact";

    std::uint64_t obs_hash_mu = 0xcbf29ce484222325ULL;
    std::uint64_t obs_hash_nu = 0xcbf29ce484222325ULL;
    auto hash_obs = [](std::uint64_t h, const Eigen::VectorXd& y) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(y.data());
        for (Eigen::Index i = 0; i < y.size() * static_cast<Eigen::Index>(sizeof(double)); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
        return h;
    };

    auto record = [&](int n) {
        StabilityRecord rec = make_record(static_cast<double>(n), pi_mu, pi_nu, cfg.metrics,
                                          rng.fork(9000 + static_cast<std::uint64_t>(n)));
        if (!rec.bl_exact) trace.bl_mode = "bounds";
        trace.records.push_back(rec);
    };
    record(0);

    for (int n = 0; n < cfg.n_steps; ++n) {
        // Observation of the current signal state under P^mu.
        const Eigen::VectorXd y = cfg.model.h(x) + cfg.model.xi.draw(signal_rng);
        obs_hash_mu = hash_obs(obs_hash_mu, y);
        obs_hash_nu = hash_obs(obs_hash_nu, y);

        RngStream step_rng_mu = rng.fork(100 + static_cast<std::uint64_t>(n));
        RngStream step_rng_nu = rng.fork(100 + static_cast<std::uint64_t>(n));
        pi_mu = predictor_step_discrete(pi_mu, y, cfg.model, step_rng_mu);
        pi_nu = predictor_step_discrete(pi_nu, y, cfg.model, step_rng_nu);

        x = cfg.model.kernel(x, signal_rng);
        if (n + 1 == cfg.n_steps || ((n + 1) % cfg.cadence == 0)) record(n + 1);
    }
    trace.path_hash = obs_hash_mu;
    trace.path_hash_mu = obs_hash_mu;
    trace.path_hash_nu = obs_hash_nu;
    return trace;
}

std::vector<StabilityTrace> run_predictor_merging(const PredictorMergingConfig& cfg) {
    std::vector<StabilityTrace> out(cfg.seeds.size());
    parallel_for_index(cfg.seeds.size(), [&](std::size_t i) {
        out[i] = run_predictor_merging_seed(cfg, cfg.seeds[i]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Convolution merging
// ---------------------------------------------------------------------------

std::vector<ConvolutionRow> run_convolution_merging(const std::vector<long>& ns,
                                                    const GaussianNoise& xi, double scale,
                                                    const QuadratureSpec& quad) {
    const DiscreteMeasure nu = DiscreteMeasure::dirac1d(0.0);
    std::vector<ConvolutionRow> rows;
    for (long n : ns) {
        if (n < 1) throw std::invalid_argument("run_convolution_merging: n must be >= 1");
        const DiscreteMeasure mu = DiscreteMeasure::dirac1d(scale / static_cast<double>(n));
        ConvolutionRow row;
        row.n = n;
        row.bl = bl_distance_exact(mu, nu);
        row.tv_atoms = tv_discrete(mu, nu);
        row.tv_smoothed = tv_convolved(mu, nu, xi, quad);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Markov-additive identity on finite chains
// ---------------------------------------------------------------------------

namespace {

/// Literal path enumeration: sum over x_{depth..T} of the joint weight.
double enum_paths(const FiniteHMM& m, const std::vector<int>& symbols, std::size_t depth,
                  Eigen::Index state) {
    if (depth == symbols.size()) return 1.0;
    double acc = 0.0;
    for (Eigen::Index nxt = 0; nxt < m.states(); ++nxt)
        acc += m.transition(state, nxt) * m.emission(nxt, symbols[depth]) *
               enum_paths(m, symbols, depth + 1, nxt);
    return acc;
}

void all_sequences(Eigen::Index symbols, int length, std::vector<int>& cur,
                   const std::function<void(const std::vector<int>&)>& visit) {
    if (static_cast<int>(cur.size()) == length) {
        visit(cur);
        return;
    }
    for (int s = 0; s < symbols; ++s) {
        cur.push_back(s);
        all_sequences(symbols, length, cur, visit);
        cur.pop_back();
    }
}

}  // namespace

double hmm_sequence_probability(const FiniteHMM& model, const Eigen::VectorXd& prior,
                                const std::vector<int>& symbols) {
    double acc = 0.0;
    for (Eigen::Index x0 = 0; x0 < model.states(); ++x0)
        acc += prior[x0] * enum_paths(model, symbols, 0, x0);
    return acc;
}

double run_lemma42_check(const FiniteHMM& model, const Eigen::VectorXd& prior, int t_max,
                         int k_max) {
    if (model.states() > 3 || model.symbols() > 3)
        throw std::invalid_argument("run_lemma42_check: at most 3 states and 3 symbols");
    if (t_max + k_max > 8)
        throw std::invalid_argument("run_lemma42_check: t_max + k_max must be <= 8");

    double worst = 0.0;
    for (int t = 0; t <= t_max; ++t) {
        std::vector<int> prefix;
        all_sequences(model.symbols(), t, prefix, [&](const std::vector<int>& y) {
            const double py = hmm_sequence_probability(model, prior, y);
            if (!(py > 0.0)) return;
            const std::vector<Eigen::VectorXd> filt = finite_hmm_forward(model, prior, y);
            const Eigen::VectorXd& pi_t = filt.back();
            for (int k = 1; k <= k_max && t + k <= 8; ++k) {
                std::vector<int> suffix;
                all_sequences(model.symbols(), k, suffix, [&](const std::vector<int>& ksym) {
                    // Conditional law of the next k observations by enumeration.
                    std::vector<int> full = y;
                    full.insert(full.end(), ksym.begin(), ksym.end());
                    const double lhs = hmm_sequence_probability(model, prior, full) / py;
                    // Filter restart.
                    double rhs = 0.0;
                    for (Eigen::Index i = 0; i < model.states(); ++i)
                        rhs += pi_t[i] * enum_paths(model, ksym, 0, i);
                    worst = std::max(worst, std::abs(lhs - rhs));
                });
            }
        });
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Output emission
// ---------------------------------------------------------------------------

void write_stability_outputs(const std::string& dir, const std::vector<StabilityTrace>& traces,
                             const std::vector<SummaryLine>& summary) {
    for (const auto& trace : traces)
        write_text_file(dir + "/trace_seed" + std::to_string(trace.seed) + ".csv",
                        trace.to_csv());
    if (!traces.empty()) {
        const auto& t0 = traces.front();
        std::vector<PlotSeries> series(4);
        series[0].label = "bl";
        series[1].label = "bl_upper";
        series[2].label = "bl_lower";
        series[3].label = "mean_gap";
        for (const auto& r : t0.records) {
            series[0].x.push_back(r.t);
            series[0].y.push_back(r.bl);
            series[1].x.push_back(r.t);
            series[1].y.push_back(r.bl_upper);
            series[2].x.push_back(r.t);
            series[2].y.push_back(r.bl_lower);
            series[3].x.push_back(r.t);
            series[3].y.push_back(r.mean_gap);
        }
        write_text_file(dir + "/plot.svg",
                        render_svg_plot("filter distance, seed " + std::to_string(t0.seed),
                                        series, true));
    }
    std::ostringstream extra;
    extra << render_summary(summary);
    for (const auto& trace : traces) {
        extra << "# seed " << trace.seed << " path_hash " << trace.path_hash << " filter_mu "
              << trace.path_hash_mu << " filter_nu " << trace.path_hash_nu << " bl_mode "
              << trace.bl_mode << "\n";
    }
    write_text_file(dir + "/summary.txt", extra.str());
}

void write_counterexample_outputs(const std::string& dir,
                                  const std::vector<CounterexampleResult>& results,
                                  const std::vector<SummaryLine>& summary) {
    for (const auto& res : results) {
        CsvWriter csv({"n", "gap", "gap_limit", "abs_residual"});
        for (std::size_t n = 0; n < res.gap.size(); ++n)
            csv.append_row({std::to_string(n + 1), CsvWriter::cell(res.gap[n]),
                            CsvWriter::cell(res.gap_limit),
                            CsvWriter::cell(std::abs(res.gap[n] - res.gap_limit))});
        csv.write_file(dir + "/gaps_seed" + std::to_string(res.seed) + ".csv");
    }
    if (!results.empty()) {
        const auto& r0 = results.front();
        PlotSeries gap{"pi_mu(f) - pi_nu(f)", {}, {}};
        PlotSeries lim{"limit gap", {}, {}};
        for (std::size_t n = 0; n < r0.gap.size(); ++n) {
            gap.x.push_back(static_cast<double>(n + 1));
            gap.y.push_back(r0.gap[n]);
            lim.x.push_back(static_cast<double>(n + 1));
            lim.y.push_back(r0.gap_limit);
        }
        write_text_file(dir + "/plot.svg",
                        render_svg_plot("non-merging gap, seed " + std::to_string(r0.seed),
                                        {gap, lim}, false));
    }
    write_text_file(dir + "/summary.txt", render_summary(summary));
}

void write_convolution_outputs(const std::string& dir, const std::vector<ConvolutionRow>& rows,
                               const std::vector<SummaryLine>& summary) {
    CsvWriter csv({"n", "bl", "tv_discrete", "tv_convolved"});
    PlotSeries bl{"bl", {}, {}}, tvd{"tv_discrete", {}, {}}, tvc{"tv_convolved", {}, {}};
    for (const auto& row : rows) {
        csv.append_row({std::to_string(row.n), CsvWriter::cell(row.bl),
                        CsvWriter::cell(row.tv_atoms), CsvWriter::cell(row.tv_smoothed)});
        bl.x.push_back(static_cast<double>(row.n));
        bl.y.push_back(row.bl);
        tvd.x.push_back(static_cast<double>(row.n));
        tvd.y.push_back(row.tv_atoms);
        tvc.x.push_back(static_cast<double>(row.n));
        tvc.y.push_back(row.tv_smoothed);
    }
    csv.write_file(dir + "/table.csv");
    write_text_file(dir + "/plot.svg", render_svg_plot("smoothing vs discrete TV", {bl, tvd, tvc}));
    write_text_file(dir + "/summary.txt", render_summary(summary));
}

std::string path_to_csv(const SignalPath& signal, const ObservationPath& obs) {
    std::vector<std::string> cols = {"t"};
    for (Eigen::Index j = 0; j < signal.states.rows(); ++j)
        cols.push_back("x_" + std::to_string(j));
    for (Eigen::Index j = 0; j < obs.values.rows(); ++j) cols.push_back("y_" + std::to_string(j));
    CsvWriter csv(cols);
    for (Eigen::Index k = 0; k < signal.times.size(); ++k) {
        std::vector<std::string> row = {CsvWriter::cell(signal.times[k])};
        for (Eigen::Index j = 0; j < signal.states.rows(); ++j)
            row.push_back(CsvWriter::cell(signal.states(j, k)));
        for (Eigen::Index j = 0; j < obs.values.rows(); ++j)
            row.push_back(CsvWriter::cell(obs.values(j, k)));
        csv.append_row(row);
    }
    return csv.str();
}

namespace {

std::vector<std::string> filter_trace_columns(Eigen::Index d) {
    std::vector<std::string> cols = {"t"};
    for (Eigen::Index j = 0; j < d; ++j) cols.push_back("mean_" + std::to_string(j));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            cols.push_back("cov_" + std::to_string(i) + std::to_string(j));
    cols.push_back("ess");
    return cols;
}

}  // namespace

std::string kalman_trace_to_csv(const std::vector<KalmanState>& states) {
    if (states.empty()) throw std::invalid_argument("kalman_trace_to_csv: empty trace");
    const Eigen::Index d = states.front().mean.size();
    CsvWriter csv(filter_trace_columns(d));
    for (const auto& s : states) {
        std::vector<std::string> row = {CsvWriter::cell(s.t)};
        for (Eigen::Index j = 0; j < d; ++j) row.push_back(CsvWriter::cell(s.mean[j]));
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) row.push_back(CsvWriter::cell(s.cov(i, j)));
        row.push_back("");  // ess is a particle field
        csv.append_row(row);
    }
    return csv.str();
}

std::string particle_trace_to_csv(const std::vector<ParticleState>& states, Eigen::Index dim) {
    CsvWriter csv(filter_trace_columns(dim));
    for (const auto& s : states) {
        std::vector<std::string> row = {CsvWriter::cell(s.t)};
        for (Eigen::Index j = 0; j < dim * (dim + 1); ++j) row.push_back("");
        row.push_back(CsvWriter::cell(s.ess));
        csv.append_row(row);
    }
    return csv.str();
}

// ---------------------------------------------------------------------------
// Config loaders
// ---------------------------------------------------------------------------

namespace {

GaussianMeasure load_gaussian_prior(const Config& cfg, const std::string& section) {
    if (cfg.has(section, "type") && cfg.get_string(section, "type") != "gaussian")
        throw ConfigError("[" + section + "] must be a gaussian prior here");
    return GaussianMeasure(cfg.get_matrix(section, "mean").col(0),
                           cfg.get_matrix(section, "cov"));
}

DiscreteMeasure load_discrete_prior(const Config& cfg, const std::string& section) {
    const Eigen::MatrixXd atoms = cfg.get_matrix(section, "atoms");
    const Eigen::MatrixXd w = cfg.get_matrix(section, "weights");
    Eigen::VectorXd weights;
    if (w.rows() == 1)
        weights = w.row(0).transpose();
    else
        weights = w.col(0);
    return DiscreteMeasure::from_raw_weights(atoms, weights);
}

Prior load_prior(const Config& cfg, const std::string& section) {
    const std::string type = cfg.get_string(section, "type");
    if (type == "gaussian") return load_gaussian_prior(cfg, section);
    if (type == "discrete") return load_discrete_prior(cfg, section);
    throw ConfigError("[" + section + "] type must be 'gaussian' or 'discrete'");
}

std::vector<long> load_seeds(const Config& cfg) {
    if (cfg.has("experiment", "seed_count")) {
        const long count = cfg.get_int("experiment", "seed_count");
        const long first = cfg.get_int("experiment", "seed_first", 1);
        std::vector<long> seeds;
        for (long s = 0; s < count; ++s) seeds.push_back(first + s);
        return seeds;
    }
    return cfg.get_ints("experiment", "seeds");
}

MetricOptions load_metric_options(const Config& cfg) {
    MetricOptions m;
    m.support_cap = cfg.get_int("metrics", "bl_cap", m.support_cap);
    m.upper_alphas = cfg.get_doubles("metrics", "alphas", m.upper_alphas);
    m.lower_trials = static_cast<int>(cfg.get_int("metrics", "lower_trials", m.lower_trials));
    return m;
}

}  // namespace

std::function<double(double)> named_scalar_function(const std::string& spec) {
    const std::size_t colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    std::vector<double> args;
    if (colon != std::string::npos) {
        std::istringstream in(spec.substr(colon + 1));
        std::string cell;
        while (std::getline(in, cell, ',')) args.push_back(std::stod(cell));
    }
    auto need = [&](std::size_t n) {
        if (args.size() != n)
            throw ConfigError("function '" + spec + "' expects " + std::to_string(n) +
                              " parameter(s)");
    };
    if (name == "zero") return [](double) { return 0.0; };
    if (name == "identity") return [](double x) { return x; };
    if (name == "cos") return [](double x) { return std::cos(x); };
    if (name == "sin") return [](double x) { return std::sin(x); };
    if (name == "const") {
        need(1);
        const double c = args[0];
        return [c](double) { return c; };
    }
    if (name == "linear") {
        need(1);
        const double a = args[0];
        return [a](double x) { return a * x; };
    }
    if (name == "affine_sin") {
        need(1);
        const double a = args[0];
        return [a](double x) { return a * x + std::sin(x); };
    }
    if (name == "clip_linear") {
        need(2);
        const double a = args[0], c = args[1];
        return [a, c](double x) { return a * std::clamp(x, -c, c); };
    }
    throw ConfigError("unknown function '" + spec + "'");
}

KalmanStabilityConfig load_kalman_stability(const Config& cfg) {
    KalmanStabilityConfig out{
        LinearGaussianModel(cfg.get_matrix("model", "A"), cfg.get_matrix("model", "B"),
                            cfg.get_matrix("model", "C"), cfg.get_matrix("model", "D")),
        load_gaussian_prior(cfg, "prior_mu"),
        load_gaussian_prior(cfg, "prior_nu"),
        cfg.get_double("experiment", "T"),
        cfg.get_double("experiment", "dt"),
        cfg.get_double("experiment", "cadence"),
        load_seeds(cfg),
        static_cast<int>(cfg.get_int("experiment", "quantile_atoms", 512)),
        load_metric_options(cfg)};
    return out;
}

ParticleStabilityConfig load_particle_stability(const Config& cfg) {
    auto b = named_scalar_function(cfg.get_string("model", "drift"));
    auto s = named_scalar_function(cfg.get_string("model", "sigma"));
    auto h0 = named_scalar_function(cfg.get_string("model", "h0", "zero"));
    DiffusionModel model(
        [b](const Eigen::VectorXd& x) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = b(x[i]);
            return y;
        },
        cfg.get_double("model", "lip_b"),
        [s](const Eigen::VectorXd& x) {
            Eigen::MatrixXd m = Eigen::MatrixXd::Zero(x.size(), x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) m(i, i) = s(x[i]);
            return m;
        },
        cfg.get_double("model", "trace_bound"), cfg.get_matrix("model", "C"),
        [h0](const Eigen::VectorXd& x) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = h0(x[i]);
            return y;
        },
        cfg.get_double("model", "lip_Cinv_h0"), cfg.get_matrix("model", "D"));
    ParticleStabilityConfig out{std::move(model),
                                load_prior(cfg, "prior_mu"),
                                load_prior(cfg, "prior_nu"),
                                cfg.get_double("experiment", "T"),
                                cfg.get_double("experiment", "dt"),
                                cfg.get_double("experiment", "cadence"),
                                cfg.get_int("experiment", "particles"),
                                load_seeds(cfg),
                                load_metric_options(cfg)};
    return out;
}

CounterexampleConfig load_counterexample(const Config& cfg) {
    CounterexampleConfig out{cfg.get_double("model", "lambda"),
                             load_discrete_prior(cfg, "prior_mu"),
                             load_discrete_prior(cfg, "prior_nu"),
                             static_cast<int>(cfg.get_int("experiment", "n_max", 8)),
                             cfg.get_double("experiment", "dt", 1e-3),
                             static_cast<int>(cfg.get_int("experiment", "settle_n", 5)),
                             load_seeds(cfg)};
    return out;
}

PredictorMergingConfig load_predictor_merging(const Config& cfg) {
    const std::string kernel_spec = cfg.get_string("model", "kernel");
    // "ar1:a,s" -> x' = a x + N(0, s^2) per coordinate.
    if (kernel_spec.rfind("ar1:", 0) != 0)
        throw ConfigError("predictor experiment supports kernel = ar1:a,s");
    std::istringstream in(kernel_spec.substr(4));
    double a = 0.0, s = 0.0;
    char comma = 0;
    if (!(in >> a >> comma >> s) || comma != ',')
        throw ConfigError("malformed kernel spec '" + kernel_spec + "'");

    auto h = named_scalar_function(cfg.get_string("model", "h"));
    DiscreteChainModel model(
        [a, s](const Eigen::VectorXd& x, RngStream& rng) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = a * x[i] + s * rng.gauss();
            return y;
        },
        [h](const Eigen::VectorXd& x) {
            Eigen::VectorXd y(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = h(x[i]);
            return y;
        },
        GaussianNoise::scalar(0.0, cfg.get_double("model", "xi_var", 1.0)));

    PredictorMergingConfig out{std::move(model),
                               load_prior(cfg, "prior_mu"),
                               load_prior(cfg, "prior_nu"),
                               static_cast<int>(cfg.get_int("experiment", "n_steps", 25)),
                               cfg.get_int("experiment", "particles", 10000),
                               static_cast<int>(cfg.get_int("experiment", "cadence", 1)),
                               load_seeds(cfg),
                               load_metric_options(cfg)};
    return out;
}

void parallel_for_index(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace fsl
