#include "tcs/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tcs {

namespace {

constexpr double kMhzPerGhz = 1e3;

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv[sv.size() - 1] <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return sv[0] / sv[sv.size() - 1];
}

}  // namespace

Eigen::MatrixXd numerical_jacobian(const ResidualFn& residual, const Eigen::VectorXd& x,
                                   double rel_step) {
    const Eigen::VectorXd r0 = residual(x);
    Eigen::MatrixXd jac(r0.size(), x.size());
    for (int p = 0; p < x.size(); ++p) {
        const double h = rel_step * std::max(std::abs(x[p]), 1.0);
        Eigen::VectorXd xp = x, xm = x;
        xp[p] += h;
        xm[p] -= h;
        jac.col(p) = (residual(xp) - residual(xm)) / (2.0 * h);
    }
    return jac;
}

FitResult least_squares(const ResidualFn& residual, const Eigen::VectorXd& init,
                        const LeastSquaresConfig& config, const JacobianFn* jacobian,
                        const std::vector<bool>* frozen) {
    const int n_params = static_cast<int>(init.size());
    if (n_params == 0 || !init.allFinite()) {
        throw std::invalid_argument("least_squares: invalid initial parameters");
    }
    std::vector<int> free_idx;
    for (int p = 0; p < n_params; ++p) {
        if (!frozen || !(*frozen)[p]) free_idx.push_back(p);
    }
    if (free_idx.empty()) {
        throw std::invalid_argument("least_squares: all parameters frozen");
    }

    Eigen::VectorXd x = init;
    Eigen::VectorXd r = residual(x);
    double cost = r.squaredNorm();
    double lambda = config.lambda_init;

    FitResult out;
    out.converged = false;

    int iter = 0;
    for (; iter < config.max_iterations; ++iter) {
        Eigen::MatrixXd jac_full = jacobian ? (*jacobian)(x) : numerical_jacobian(residual, x);
        Eigen::MatrixXd jac(jac_full.rows(), free_idx.size());
        for (size_t c = 0; c < free_idx.size(); ++c) jac.col(c) = jac_full.col(free_idx[c]);

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;

        bool stepped = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            // Undamped Gauss-Newton first; damp only when it fails downhill.
            const double lambda_try = attempt == 0 ? 0.0 : lambda;
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda_try * jtj.diagonal().cwiseMax(1e-12);
            const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            if (!step.allFinite()) {
                lambda *= 8.0;
                continue;
            }
            Eigen::VectorXd x_trial = x;
            for (size_t c = 0; c < free_idx.size(); ++c) x_trial[free_idx[c]] += step[c];

            const Eigen::VectorXd r_trial = residual(x_trial);
            const double cost_trial = r_trial.squaredNorm();
            if (std::isfinite(cost_trial) && cost_trial <= cost) {
                const double step_rel =
                    step.norm() / std::max(1e-300, x.norm() + step.norm());
                const double decrease_rel = (cost - cost_trial) / std::max(cost, 1e-300);
                x = x_trial;
                r = r_trial;
                cost = cost_trial;
                lambda = std::max(lambda * 0.3, 1e-14);
                stepped = true;
                if (step_rel < config.step_tol || decrease_rel < config.residual_tol) {
                    out.converged = true;
                }
                break;
            }
            if (attempt > 0) lambda *= 8.0;
        }
        if (!stepped || out.converged) {
            if (!stepped) out.converged = true;  // no downhill direction: at a minimum
            ++iter;
            break;
        }
    }

    out.params = x;
    out.iterations = iter;
    out.residual_rms = std::sqrt(cost / std::max<int>(1, static_cast<int>(r.size())));

    // Covariance σ²(JᵀJ)⁻¹ over the free parameters, embedded at their slots.
    Eigen::MatrixXd jac_full = jacobian ? (*jacobian)(x) : numerical_jacobian(residual, x);
    Eigen::MatrixXd jac(jac_full.rows(), free_idx.size());
    for (size_t c = 0; c < free_idx.size(); ++c) jac.col(c) = jac_full.col(free_idx[c]);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    out.jtj_condition = condition_number(jtj);
    const int dof = std::max<int>(1, static_cast<int>(r.size()) -
                                         static_cast<int>(free_idx.size()));
    const double sigma_sq = cost / dof;
    out.covariance = Eigen::MatrixXd::Zero(n_params, n_params);
    const Eigen::MatrixXd cov_free =
        sigma_sq * jtj.ldlt().solve(Eigen::MatrixXd::Identity(jtj.rows(), jtj.cols()));
    for (size_t rI = 0; rI < free_idx.size(); ++rI) {
        for (size_t cI = 0; cI < free_idx.size(); ++cI) {
            out.covariance(free_idx[rI], free_idx[cI]) = cov_free(rI, cI);
        }
    }
    return out;
}

AnticrossingData track_peaks(const SpectrumMap& map) {
    const int n_bias = static_cast<int>(map.bias_a.size());
    const int n_freq = static_cast<int>(map.probe_ghz.size());
    if (map.magnitude.rows() != n_bias || map.magnitude.cols() != n_freq) {
        throw std::invalid_argument("track_peaks: magnitude grid does not match axes");
    }
    if (n_freq < 7) {
        throw std::invalid_argument("track_peaks: probe grid too small");
    }
    const double df = n_freq > 1 ? map.probe_ghz[1] - map.probe_ghz[0] : 0.0;
    const double global_max = map.magnitude.maxCoeff();
    const double prominence = 1e-3 * global_max;

    struct Peak {
        double freq;
        double height;
    };

    AnticrossingData data;
    data.bias_a = map.bias_a;
    data.upper_ghz.assign(n_bias, std::numeric_limits<double>::quiet_NaN());
    data.lower_ghz.assign(n_bias, std::numeric_limits<double>::quiet_NaN());

    int deficient_columns = 0;
    double prev_upper = std::numeric_limits<double>::quiet_NaN();
    double prev_lower = std::numeric_limits<double>::quiet_NaN();

    for (int i = 0; i < n_bias; ++i) {
        std::vector<Peak> peaks;
        for (int j = 1; j + 1 < n_freq; ++j) {
            const double y0 = map.magnitude(i, j - 1);
            const double y1 = map.magnitude(i, j);
            const double y2 = map.magnitude(i, j + 1);
            if (y1 > y0 && y1 >= y2 && y1 > prominence) {
                // Sub-bin parabolic refinement through the three samples.
                const double denom = y0 - 2.0 * y1 + y2;
                double shift = 0.0;
                if (std::abs(denom) > 1e-300) shift = 0.5 * (y0 - y2) / denom;
                shift = std::clamp(shift, -0.5, 0.5);
                peaks.push_back({map.probe_ghz[j] + shift * df, y1});
            }
        }
        std::sort(peaks.begin(), peaks.end(),
                  [](const Peak& a, const Peak& b) { return a.height > b.height; });

        // Two largest maxima separated by at least 3 bins.
        std::vector<Peak> chosen;
        for (const auto& p : peaks) {
            if (chosen.empty()) {
                chosen.push_back(p);
            } else if (std::abs(p.freq - chosen[0].freq) >= 3.0 * df) {
                chosen.push_back(p);
                break;
            }
        }

        if (chosen.size() == 2) {
            const double hi = std::max(chosen[0].freq, chosen[1].freq);
            const double lo = std::min(chosen[0].freq, chosen[1].freq);
            data.upper_ghz[i] = hi;
            data.lower_ghz[i] = lo;
            prev_upper = hi;
            prev_lower = lo;
        } else if (chosen.size() == 1) {
            ++deficient_columns;
            // Single far-detuned peak: assign by continuity with the last column.
            const double f = chosen[0].freq;
            if (std::isnan(prev_upper) && std::isnan(prev_lower)) {
                data.lower_ghz[i] = f;
            } else if (std::isnan(prev_upper) ||
                       (!std::isnan(prev_lower) &&
                        std::abs(f - prev_lower) <= std::abs(f - prev_upper))) {
                data.lower_ghz[i] = f;
                prev_lower = f;
            } else {
                data.upper_ghz[i] = f;
                prev_upper = f;
            }
        } else {
            ++deficient_columns;
        }
    }

    if (deficient_columns > 0.4 * n_bias) {
        throw std::runtime_error("track_peaks: fewer than 2 maxima in more than 40% of columns (" +
                                 std::to_string(deficient_columns) + "/" +
                                 std::to_string(n_bias) + ")");
    }
    return data;
}

double single_branch_freq(bool upper, const SingleFitParams& p, double current_a) {
    const double qubit = p.a_ghz_per_a * current_a + p.b_ghz;
    const double u = p.f_r_ghz - qubit;
    const double g = p.g_mhz / kMhzPerGhz;
    const double root = std::sqrt(4.0 * g * g + u * u);
    return 0.5 * (p.f_r_ghz + qubit) + (upper ? 0.5 : -0.5) * root;
}

double ensemble_branch_freq(bool upper, const EnsembleFitParams& p, double current_a) {
    const double g = p.g_mhz / kMhzPerGhz;
    if (upper) {
        const double qubit = p.a_ghz_per_a * current_a + p.b_ghz;
        const double u = p.f_r_ghz - qubit;
        return 0.5 * (p.f_r_ghz + qubit) + 0.5 * std::sqrt(4.0 * g * g + u * u);
    }
    const double qubit = p.a_ghz_per_a * (current_a + p.i_shift_a) + p.b_ghz;
    const double u = p.f_r_ghz - qubit;
    return 0.5 * (p.f_r_ghz + qubit) - p.f_shift_ghz - 0.5 * std::sqrt(4.0 * g * g + u * u);
}

namespace {

struct BranchPoint {
    double current;
    double freq;
    bool upper;
};

std::vector<BranchPoint> collect_points(const AnticrossingData& data) {
    std::vector<BranchPoint> pts;
    for (size_t i = 0; i < data.bias_a.size(); ++i) {
        if (!std::isnan(data.upper_ghz[i])) {
            pts.push_back({data.bias_a[i], data.upper_ghz[i], true});
        }
        if (!std::isnan(data.lower_ghz[i])) {
            pts.push_back({data.bias_a[i], data.lower_ghz[i], false});
        }
    }
    return pts;
}

double min_gap(const AnticrossingData& data, size_t* argmin = nullptr) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < data.bias_a.size(); ++i) {
        if (std::isnan(data.upper_ghz[i]) || std::isnan(data.lower_ghz[i])) continue;
        const double gap = data.upper_ghz[i] - data.lower_ghz[i];
        if (gap < best) {
            best = gap;
            if (argmin) *argmin = i;
        }
    }
    return best;
}

}  // namespace

SingleFitParams initial_guess(const AnticrossingData& data) {
    const auto pts = collect_points(data);
    if (pts.size() < 6) {
        throw std::invalid_argument("initial_guess: too few tracked points");
    }
    size_t gap_idx = 0;
    const double gap = min_gap(data, &gap_idx);
    if (!std::isfinite(gap)) {
        throw std::invalid_argument("initial_guess: data never shows both branches");
    }
    const double f_center =
        0.5 * (data.upper_ghz[gap_idx] + data.lower_ghz[gap_idx]);

    // Cavity plateau: points close to the gap midline. Qubit-like points carry
    // the linear trend.
    std::vector<double> plateau;
    std::vector<BranchPoint> qubit_like;
    for (const auto& p : pts) {
        if (std::abs(p.freq - f_center) < 1.5 * gap) {
            plateau.push_back(p.freq);
        } else {
            qubit_like.push_back(p);
        }
    }

    SingleFitParams init;
    if (!plateau.empty()) {
        std::nth_element(plateau.begin(), plateau.begin() + plateau.size() / 2,
                         plateau.end());
        init.f_r_ghz = plateau[plateau.size() / 2];
    } else {
        init.f_r_ghz = f_center;
    }

    if (qubit_like.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& p : qubit_like) {
            sx += p.current;
            sy += p.freq;
            sxx += p.current * p.current;
            sxy += p.current * p.freq;
        }
        const double n = static_cast<double>(qubit_like.size());
        const double denom = n * sxx - sx * sx;
        if (std::abs(denom) > 1e-300) {
            init.a_ghz_per_a = (n * sxy - sx * sy) / denom;
            init.b_ghz = (sy - init.a_ghz_per_a * sx) / n;
        }
    }
    if (init.a_ghz_per_a == 0.0) {
        // Degenerate geometry: fall back to a slope crossing the window.
        const double span = data.bias_a.back() - data.bias_a.front();
        init.a_ghz_per_a = (span != 0.0) ? 4.0 * gap / span : 1.0;
        init.b_ghz = init.f_r_ghz - init.a_ghz_per_a * data.bias_a[gap_idx];
    }
    init.g_mhz = 0.5 * gap * kMhzPerGhz;
    return init;
}

namespace {

// Shared assembly for the single/ensemble fits: residuals over both branches
// restricted to the ±window around the crossing, with analytic Jacobians.
struct WindowedData {
    std::vector<BranchPoint> pts;
};

WindowedData window_data(const AnticrossingData& data, double a_init, double b_init,
                         double f_r_init, double gap_ghz, double window_gaps) {
    const double i_cross = (f_r_init - b_init) / a_init;
    const double half_window =
        window_gaps * gap_ghz / std::max(std::abs(a_init), 1e-300);
    WindowedData w;
    for (const auto& p : collect_points(data)) {
        if (std::abs(p.current - i_cross) <= half_window) w.pts.push_back(p);
    }
    if (w.pts.size() < 5) {
        // Window collapsed (e.g. very steep slope estimate): keep everything.
        w.pts = collect_points(data);
    }
    return w;
}

}  // namespace

SingleFitOutcome fit_single(const AnticrossingData& data,
                            std::optional<SingleFitParams> init, double window_gaps) {
    const SingleFitParams start = init ? *init : initial_guess(data);
    const double gap_ghz = 2.0 * start.g_mhz / kMhzPerGhz;
    const auto w = window_data(data, start.a_ghz_per_a, start.b_ghz, start.f_r_ghz,
                               gap_ghz, window_gaps);

    auto unpack = [](const Eigen::VectorXd& x) {
        return SingleFitParams{x[0], x[1], x[2], x[3]};
    };
    ResidualFn residual = [&, unpack](const Eigen::VectorXd& x) {
        const SingleFitParams p = unpack(x);
        Eigen::VectorXd r(w.pts.size());
        for (size_t k = 0; k < w.pts.size(); ++k) {
            r[k] = single_branch_freq(w.pts[k].upper, p, w.pts[k].current) - w.pts[k].freq;
        }
        return r;
    };
    JacobianFn jac = [&, unpack](const Eigen::VectorXd& x) {
        const SingleFitParams p = unpack(x);
        Eigen::MatrixXd jm(w.pts.size(), 4);
        const double g = p.g_mhz / kMhzPerGhz;
        for (size_t k = 0; k < w.pts.size(); ++k) {
            const double current = w.pts[k].current;
            const double sign = w.pts[k].upper ? 1.0 : -1.0;
            const double u = p.f_r_ghz - p.a_ghz_per_a * current - p.b_ghz;
            const double root = std::sqrt(4.0 * g * g + u * u);
            const double du = sign * 0.5 * u / std::max(root, 1e-300);
            jm(k, 0) = 0.5 * current - du * current;   // ∂/∂a
            jm(k, 1) = 0.5 - du;                       // ∂/∂b
            jm(k, 2) = 0.5 + du;                       // ∂/∂f_r
            jm(k, 3) = sign * 2.0 * g / std::max(root, 1e-300) / kMhzPerGhz;  // ∂/∂g
        }
        return jm;
    };

    Eigen::VectorXd x0(4);
    x0 << start.a_ghz_per_a, start.b_ghz, start.f_r_ghz, start.g_mhz;
    FitResult core = least_squares(residual, x0, {}, &jac);
    core.params[3] = std::abs(core.params[3]);  // g enters as g² only
    SingleFitOutcome out;
    out.params = unpack(core.params);
    out.core = std::move(core);
    return out;
}

EnsembleFitOutcome fit_ensemble(const AnticrossingData& data,
                                std::optional<EnsembleFitParams> init,
                                double window_gaps, bool freeze_shifts) {
    EnsembleFitParams start;
    if (init) {
        start = *init;
    } else {
        const SingleFitParams s = initial_guess(data);
        start = {s.a_ghz_per_a, s.b_ghz, s.f_r_ghz, s.g_mhz, 0.0, 0.0};
    }
    const double gap_ghz = 2.0 * start.g_mhz / kMhzPerGhz;
    const auto w = window_data(data, start.a_ghz_per_a, start.b_ghz, start.f_r_ghz,
                               gap_ghz, window_gaps);

    auto unpack = [](const Eigen::VectorXd& x) {
        return EnsembleFitParams{x[0], x[1], x[2], x[3], x[4], x[5]};
    };
    ResidualFn residual = [&, unpack](const Eigen::VectorXd& x) {
        const EnsembleFitParams p = unpack(x);
        Eigen::VectorXd r(w.pts.size());
        for (size_t k = 0; k < w.pts.size(); ++k) {
            r[k] = ensemble_branch_freq(w.pts[k].upper, p, w.pts[k].current) -
                   w.pts[k].freq;
        }
        return r;
    };
    JacobianFn jac = [&, unpack](const Eigen::VectorXd& x) {
        const EnsembleFitParams p = unpack(x);
        Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(w.pts.size(), 6);
        const double g = p.g_mhz / kMhzPerGhz;
        for (size_t k = 0; k < w.pts.size(); ++k) {
            const bool upper = w.pts[k].upper;
            const double sign = upper ? 1.0 : -1.0;
            const double current_eff =
                upper ? w.pts[k].current : w.pts[k].current + p.i_shift_a;
            const double u = p.f_r_ghz - p.a_ghz_per_a * current_eff - p.b_ghz;
            const double root = std::sqrt(4.0 * g * g + u * u);
            const double du = sign * 0.5 * u / std::max(root, 1e-300);
            jm(k, 0) = 0.5 * current_eff - du * current_eff;
            jm(k, 1) = 0.5 - du;
            jm(k, 2) = 0.5 + du;
            jm(k, 3) = sign * 2.0 * g / std::max(root, 1e-300) / kMhzPerGhz;
            if (!upper) {
                jm(k, 4) = 0.5 * p.a_ghz_per_a - du * p.a_ghz_per_a;  // ∂/∂I_shift
                jm(k, 5) = -1.0;                                       // ∂/∂f_shift
            }
        }
        return jm;
    };

    Eigen::VectorXd x0(6);
    x0 << start.a_ghz_per_a, start.b_ghz, start.f_r_ghz, start.g_mhz, start.i_shift_a,
        start.f_shift_ghz;
    std::vector<bool> frozen(6, false);
    if (freeze_shifts) frozen[4] = frozen[5] = true;

    FitResult core = least_squares(residual, x0, {}, &jac, &frozen);
    core.params[3] = std::abs(core.params[3]);  // g enters as g² only
    EnsembleFitOutcome out;
    out.params = unpack(core.params);
    out.core = std::move(core);

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : w.pts) {
        lo = std::min(lo, p.freq);
        hi = std::max(hi, p.freq);
    }
    out.span_warning = (hi - lo) < 2.0 * (2.0 * out.params.g_mhz / kMhzPerGhz);
    return out;
}

double effective_coupling_mhz(const EnsembleFitParams& p) {
    if (p.a_ghz_per_a == 0.0) {
        throw std::invalid_argument("effective_coupling: zero slope");
    }
    const double i_star = (p.f_r_ghz - p.b_ghz) / p.a_ghz_per_a - 0.5 * p.i_shift_a;
    const double up = ensemble_branch_freq(true, p, i_star);
    const double dn = ensemble_branch_freq(false, p, i_star);
    return 0.5 * (up - dn) * kMhzPerGhz;
}

}  // namespace tcs
