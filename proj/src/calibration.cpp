#include "tcs/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "tcs/dynamics.hpp"
#include "tcs/hamiltonian.hpp"

namespace tcs {

namespace {

using Vec8 = std::array<double, kNumFluxLines>;

Vec8 add_scaled(const Vec8& base, const Vec8& dir, double scale) {
    Vec8 out = base;
    for (int k = 0; k < kNumFluxLines; ++k) out[k] += scale * dir[k];
    return out;
}

Vec8 unit_axis(int coil) {
    Vec8 v{};
    v[coil] = 1.0;
    return v;
}

double lower_branch_freq(const DeviceConfig& config, int qubit, double f_qubit_ghz) {
    return jc_eigenvalues(config.resonator.omega_r_ghz, f_qubit_ghz,
                          config.qubits[qubit].g_ge_mhz)
        .first;
}

double lower_branch_at_bias(const DeviceConfig& config, int qubit,
                            const BiasVector& bias) {
    return lower_branch_freq(config, qubit,
                             qubit_freq_of_current(config, qubit, bias));
}

struct ScanGeometry {
    Vec8 center;
    Vec8 axis_x;
    Vec8 axis_y;
    int qubit_x;
    int qubit_y;
};

// Core response synthesis over two current directions.
TwoCoilScan synthesize_scan(const DeviceConfig& config, const ScanGeometry& geo,
                            double probe_freq_ghz, const ScanOptions& options) {
    config.validate();
    if (options.grid_points_x < 5 || options.grid_points_y < 5) {
        throw std::invalid_argument("synthesize_scan: grid too small");
    }

    auto qubit_freq_at = [&](int q, double u, double v) {
        BiasVector bias;
        bias.currents_a = add_scaled(add_scaled(geo.center, geo.axis_x, u), geo.axis_y, v);
        return qubit_freq_of_current(config, q, bias);
    };

    // Axis ranges sized so each qubit's frequency sweeps ±freq_window along
    // its own axis.
    auto axis_range = [&](int q, bool x_axis) {
        const double h = 1e-7;
        const double f_plus = x_axis ? qubit_freq_at(q, h, 0.0) : qubit_freq_at(q, 0.0, h);
        const double f_minus = x_axis ? qubit_freq_at(q, -h, 0.0) : qubit_freq_at(q, 0.0, -h);
        const double deriv = (f_plus - f_minus) / (2.0 * h);
        if (std::abs(deriv) < 1e-6) {
            throw std::invalid_argument("synthesize_scan: axis does not tune its qubit");
        }
        return options.freq_window_ghz / std::abs(deriv);
    };
    const double range_x = axis_range(geo.qubit_x, true);
    const double range_y = axis_range(geo.qubit_y, false);

    TwoCoilScan scan;
    scan.coil_x = geo.qubit_x;
    scan.coil_y = geo.qubit_y;
    scan.probe_freq_ghz = probe_freq_ghz;
    scan.ix_a.resize(options.grid_points_x);
    scan.iy_a.resize(options.grid_points_y);
    for (int i = 0; i < options.grid_points_x; ++i) {
        scan.ix_a[i] = -range_x + 2.0 * range_x * i / (options.grid_points_x - 1);
    }
    for (int j = 0; j < options.grid_points_y; ++j) {
        scan.iy_a[j] = -range_y + 2.0 * range_y * j / (options.grid_points_y - 1);
    }
    scan.response.resize(options.grid_points_x, options.grid_points_y);

    const double hw = options.ridge_halfwidth_ghz;
    double closest_approach = 1e300;

    if (options.mode == ScanMode::DispersiveRidge) {
        for (int i = 0; i < options.grid_points_x; ++i) {
            for (int j = 0; j < options.grid_points_y; ++j) {
                double r = 0.0;
                for (int q : {geo.qubit_x, geo.qubit_y}) {
                    const double f_lower = lower_branch_freq(
                        config, q, qubit_freq_at(q, scan.ix_a[i], scan.iy_a[j]));
                    const double d = (f_lower - probe_freq_ghz) / hw;
                    closest_approach = std::min(closest_approach, std::abs(d));
                    r += 1.0 / (1.0 + d * d);
                }
                scan.response(i, j) = r;
            }
        }
    } else {
        SpectrumOptions sim_opts;
        sim_opts.active_window_ghz = 1.2;
        for (int i = 0; i < options.grid_points_x; ++i) {
            for (int j = 0; j < options.grid_points_y; ++j) {
                BiasVector bias;
                bias.currents_a = add_scaled(add_scaled(geo.center, geo.axis_x, scan.ix_a[i]),
                                             geo.axis_y, scan.iy_a[j]);
                const auto trace =
                    transmission_spectrum(config, bias, {probe_freq_ghz}, sim_opts);
                scan.response(i, j) = std::abs(trace.s21[0]);
                for (int q : {geo.qubit_x, geo.qubit_y}) {
                    const double f_lower = lower_branch_freq(
                        config, q, qubit_freq_at(q, scan.ix_a[i], scan.iy_a[j]));
                    closest_approach =
                        std::min(closest_approach, std::abs(f_lower - probe_freq_ghz) / hw);
                }
            }
        }
    }

    if (closest_approach > 5.0) {
        throw std::runtime_error(
            "synthesize_scan: no qubit crosses the probe frequency within the scan window");
    }

    if (options.noise_rms > 0.0) {
        std::mt19937_64 rng(options.seed);
        std::normal_distribution<double> noise(0.0, options.noise_rms);
        for (int i = 0; i < options.grid_points_x; ++i) {
            for (int j = 0; j < options.grid_points_y; ++j) {
                scan.response(i, j) += noise(rng);
            }
        }
    }
    return scan;
}

// Center bias placing both pair qubits at resonance with the cavity, realized
// through the two coils of the pair only.
ScanGeometry pair_geometry(const DeviceConfig& config, int coil_x, int coil_y) {
    const double omega_r = config.resonator.omega_r_ghz;
    const double phi_x = flux_for_target_freq(config, coil_x, omega_r);
    const double phi_y = flux_for_target_freq(config, coil_y, omega_r);
    Eigen::Matrix2d m;
    m << config.mutuals.ratios(coil_x, coil_x) * config.mutuals.diagonal_mutuals[coil_x],
        config.mutuals.ratios(coil_x, coil_y) * config.mutuals.diagonal_mutuals[coil_x],
        config.mutuals.ratios(coil_y, coil_x) * config.mutuals.diagonal_mutuals[coil_y],
        config.mutuals.ratios(coil_y, coil_y) * config.mutuals.diagonal_mutuals[coil_y];
    const Eigen::Vector2d currents = m.colPivHouseholderQr().solve(
        Eigen::Vector2d(phi_x, phi_y));

    ScanGeometry geo;
    geo.center = Vec8{};
    geo.center[coil_x] = currents[0];
    geo.center[coil_y] = currents[1];
    geo.axis_x = unit_axis(coil_x);
    geo.axis_y = unit_axis(coil_y);
    geo.qubit_x = coil_x;
    geo.qubit_y = coil_y;
    return geo;
}

}  // namespace

double auto_probe_frequency(const DeviceConfig& config, int qubit,
                            const BiasVector& center) {
    return lower_branch_at_bias(config, qubit, center) - 0.020;
}

TwoCoilScan synthesize_two_coil_scan(const DeviceConfig& config, int coil_x,
                                     int coil_y, double probe_freq_ghz,
                                     const BiasVector& center,
                                     const ScanOptions& options) {
    if (coil_x == coil_y || coil_x < 0 || coil_y < 0 || coil_x >= kNumFluxLines ||
        coil_y >= kNumFluxLines) {
        throw std::invalid_argument("synthesize_two_coil_scan: bad coil pair");
    }
    ScanGeometry geo;
    geo.center = center.currents_a;
    geo.axis_x = unit_axis(coil_x);
    geo.axis_y = unit_axis(coil_y);
    geo.qubit_x = coil_x;
    geo.qubit_y = coil_y;
    return synthesize_scan(config, geo, probe_freq_ghz, options);
}

RidgeFit extract_slope(const TwoCoilScan& scan, bool transposed) {
    const Eigen::MatrixXd grid =
        transposed ? Eigen::MatrixXd(scan.response.transpose()) : scan.response;
    const std::vector<double>& abscissa = transposed ? scan.iy_a : scan.ix_a;
    const std::vector<double>& ordinate = transposed ? scan.ix_a : scan.iy_a;
    const int n_cols = static_cast<int>(abscissa.size());
    const int n_rows = static_cast<int>(ordinate.size());

    // Contrast versus noise floor (median + MAD of the whole map).
    std::vector<double> values(grid.data(), grid.data() + grid.size());
    std::nth_element(values.begin(), values.begin() + values.size() / 2, values.end());
    const double median = values[values.size() / 2];
    std::vector<double> dev(values.size());
    for (size_t k = 0; k < values.size(); ++k) dev[k] = std::abs(values[k] - median);
    std::nth_element(dev.begin(), dev.begin() + dev.size() / 2, dev.end());
    const double noise_floor = std::max(1.4826 * dev[dev.size() / 2], 1e-9);
    const double contrast = grid.maxCoeff() - median;
    if (contrast < 3.0 * noise_floor) {
        throw std::runtime_error("extract_slope: ridge contrast below 3x the noise floor");
    }

    const double dy = ordinate.size() > 1 ? ordinate[1] - ordinate[0] : 1.0;
    std::vector<double> xs, ys;
    for (int c = 0; c < n_cols; ++c) {
        int jmax = 0;
        double best = -1e300;
        for (int r = 0; r < n_rows; ++r) {
            if (grid(c, r) > best) {
                best = grid(c, r);
                jmax = r;
            }
        }
        if (best < median + 0.5 * contrast) continue;  // ridge absent here
        double refined = ordinate[jmax];
        if (jmax > 0 && jmax + 1 < n_rows) {
            const double y0 = grid(c, jmax - 1), y1 = grid(c, jmax), y2 = grid(c, jmax + 1);
            const double denom = y0 - 2.0 * y1 + y2;
            if (std::abs(denom) > 1e-300) {
                refined += std::clamp(0.5 * (y0 - y2) / denom, -0.5, 0.5) * dy;
            }
        }
        xs.push_back(abscissa[c]);
        ys.push_back(refined);
    }
    if (xs.size() < 5) {
        throw std::runtime_error("extract_slope: too few ridge columns above contrast");
    }

    // Least-squares line with outlier trimming (the crossing ridge of the
    // other qubit can capture a few argmax points).
    std::vector<char> keep(xs.size(), 1);
    double slope = 0.0, intercept = 0.0, rms = 0.0;
    for (int round = 0; round < 4; ++round) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (size_t k = 0; k < xs.size(); ++k) {
            if (!keep[k]) continue;
            sx += xs[k];
            sy += ys[k];
            sxx += xs[k] * xs[k];
            sxy += xs[k] * ys[k];
            ++n;
        }
        const double denom = n * sxx - sx * sx;
        if (n < 5 || std::abs(denom) < 1e-300) break;
        slope = (n * sxy - sx * sy) / denom;
        intercept = (sy - slope * sx) / n;
        rms = 0.0;
        for (size_t k = 0; k < xs.size(); ++k) {
            if (!keep[k]) continue;
            const double r = ys[k] - slope * xs[k] - intercept;
            rms += r * r;
        }
        rms = std::sqrt(rms / n);
        if (round == 3) break;
        const double cutoff = std::max(2.5 * rms, 2.0 * std::abs(dy));
        bool changed = false;
        for (size_t k = 0; k < xs.size(); ++k) {
            const bool inlier = std::abs(ys[k] - slope * xs[k] - intercept) <= cutoff;
            if (inlier != static_cast<bool>(keep[k])) {
                keep[k] = inlier;
                changed = true;
            }
        }
        if (!changed) break;
    }

    RidgeFit fit;
    fit.slope = slope;
    fit.intercept_a = intercept;
    fit.residual_a = rms;
    fit.transposed = transposed;
    return fit;
}

PairScanFit fit_coil_pair(const DeviceConfig& config, int coil_x, int coil_y,
                          const ScanOptions& options) {
    if (coil_x == coil_y) {
        throw std::invalid_argument("fit_coil_pair: coils must differ");
    }
    const ScanGeometry geo = pair_geometry(config, coil_x, coil_y);
    BiasVector center;
    center.currents_a = geo.center;
    const double probe = auto_probe_frequency(config, coil_y, center);
    const TwoCoilScan scan = synthesize_scan(config, geo, probe, options);

    PairScanFit out;
    out.coil_x = coil_x;
    out.coil_y = coil_y;
    out.column_fit = extract_slope(scan, false);
    out.transposed_fit = extract_slope(scan, true);
    return out;
}

MutualMatrix build_mutual_matrix(const std::vector<PairScanFit>& fits,
                                 const std::array<double, kNumFluxLines>& diagonal_mutuals) {
    std::set<std::pair<int, int>> seen;
    MutualMatrix m;
    m.diagonal_mutuals = diagonal_mutuals;
    for (const auto& fit : fits) {
        const int x = fit.coil_x, y = fit.coil_y;
        if (x == y || x < 0 || y < 0 || x >= kNumFluxLines || y >= kNumFluxLines) {
            throw std::invalid_argument("build_mutual_matrix: bad coil pair in fits");
        }
        const auto key = std::minmax(x, y);
        if (!seen.insert(key).second) {
            throw std::invalid_argument("build_mutual_matrix: duplicate pair (" +
                                        std::to_string(key.first) + "," +
                                        std::to_string(key.second) + ")");
        }
        // Column ridge tracks qubit y (dI_y/dI_x = −M_yx/M_yy); the transposed
        // ridge tracks qubit x.
        m.ratios(y, x) = -fit.column_fit.slope;
        m.ratios(x, y) = -fit.transposed_fit.slope;
    }
    std::string missing;
    for (int x = 0; x < kNumFluxLines; ++x) {
        for (int y = x + 1; y < kNumFluxLines; ++y) {
            if (!seen.count({x, y})) {
                missing += (missing.empty() ? "" : ", ") + std::to_string(x) + "-" +
                           std::to_string(y);
            }
        }
    }
    if (!missing.empty()) {
        throw std::invalid_argument("build_mutual_matrix: missing coil pairs: " + missing);
    }
    return m;
}

CompensationPlan solve_compensation(const MutualMatrix& matrix, int target_qubit) {
    if (target_qubit < 0 || target_qubit >= kNumFluxLines) {
        throw std::invalid_argument("solve_compensation: target out of range");
    }
    std::vector<int> others;
    for (int k = 0; k < kNumFluxLines; ++k) {
        if (k != target_qubit) others.push_back(k);
    }
    Eigen::MatrixXd a(kNumFluxLines - 1, kNumFluxLines - 1);
    Eigen::VectorXd rhs(kNumFluxLines - 1);
    for (int r = 0; r < kNumFluxLines - 1; ++r) {
        const int row_qubit = others[r];
        for (int c = 0; c < kNumFluxLines - 1; ++c) {
            a(r, c) = matrix.ratios(row_qubit, others[c]);
        }
        rhs[r] = -matrix.ratios(row_qubit, target_qubit);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double cond =
        sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1]
                                : std::numeric_limits<double>::infinity();
    if (!(cond < 1e8)) {
        throw std::runtime_error("solve_compensation: compensation system ill-conditioned (cond " +
                                 std::to_string(cond) + ")");
    }
    const Eigen::VectorXd sol = svd.solve(rhs);

    CompensationPlan plan;
    plan.target_qubit = target_qubit;
    plan.condition_number = cond;
    plan.delta_i[target_qubit] = 1.0;
    for (int c = 0; c < kNumFluxLines - 1; ++c) {
        plan.delta_i[others[c]] = sol[c];
    }
    return plan;
}

RidgeFit verify_isolation(const DeviceConfig& config, const CompensationPlan& plan,
                          int coil_y, const ScanOptions& options) {
    if (coil_y == plan.target_qubit) {
        throw std::invalid_argument("verify_isolation: pick a coil other than the target");
    }
    ScanGeometry geo = pair_geometry(config, plan.target_qubit, coil_y);
    geo.axis_x = plan.delta_i;  // compensated coordinate on the x axis
    BiasVector center;
    center.currents_a = geo.center;
    const double probe = auto_probe_frequency(config, coil_y, center);
    const TwoCoilScan scan = synthesize_scan(config, geo, probe, options);
    return extract_slope(scan, false);
}

}  // namespace tcs
