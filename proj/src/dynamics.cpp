#include "tcs/dynamics.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace tcs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Trace-functional row index used to pin trace(ρ) = 1.
constexpr int kTraceRow = 0;

SparseCMatrix with_trace_row(const SparseCMatrix& lv, int dim_rho) {
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(lv.nonZeros() + dim_rho);
    for (int k = 0; k < lv.outerSize(); ++k) {
        for (SparseCMatrix::InnerIterator it(lv, k); it; ++it) {
            if (it.row() == kTraceRow) continue;
            triplets.emplace_back(it.row(), it.col(), it.value());
        }
    }
    for (int j = 0; j < dim_rho; ++j) {
        triplets.emplace_back(kTraceRow, j * dim_rho + j, Complex(1.0, 0.0));
    }
    SparseCMatrix out(lv.rows(), lv.cols());
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

double frobenius(const SparseCMatrix& m) {
    double acc = 0.0;
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseCMatrix::InnerIterator it(m, k); it; ++it) {
            acc += std::norm(it.value());
        }
    }
    return std::sqrt(acc);
}

[[noreturn]] void report_degenerate(const SparseCMatrix& lv) {
    const int n = static_cast<int>(lv.rows());
    if (n <= 400) {
        const DenseMatrix lv_dense(lv);
        Eigen::JacobiSVD<DenseMatrix> svd(lv_dense);
        const auto& sv = svd.singularValues();
        const double tol = 1e-10 * std::max(sv[0], 1.0);
        int null_dim = 0;
        for (int i = 0; i < sv.size(); ++i) {
            if (sv[i] < tol) ++null_dim;
        }
        throw std::runtime_error("steady_state: degenerate Liouvillian null space, dimension " +
                                 std::to_string(null_dim));
    }
    throw std::runtime_error(
        "steady_state: singular Liouvillian (null space not one-dimensional)");
}

}  // namespace

void LindbladModel::validate() const {
    for (const auto& ch : channels) {
        if (ch.rate < 0.0) {
            throw std::invalid_argument("LindbladModel: negative collapse rate");
        }
        if (ch.op.layout() != hamiltonian.layout()) {
            throw std::invalid_argument("LindbladModel: channel layout mismatch");
        }
    }
    if (n_thermal < 0.0) {
        throw std::invalid_argument("LindbladModel: n_thermal must be nonnegative");
    }
}

double pure_dephasing_rate(double t1_s, double t2_s) {
    if (t1_s <= 0.0 || t2_s <= 0.0) {
        throw std::invalid_argument("pure_dephasing_rate: times must be positive");
    }
    if (t2_s > 2.0 * t1_s + 1e-15) {
        throw std::invalid_argument("pure_dephasing_rate: T2 exceeds 2·T1 (unphysical)");
    }
    return std::max(1.0 / t2_s - 0.5 / t1_s, 0.0);
}

std::vector<int> excitation_subspace(const HilbertLayout& layout, int max_exc) {
    std::vector<int> indices;
    for (int i = 0; i < layout.total_dim(); ++i) {
        const auto levels = layout.levels_of(i);
        int total = 0;
        for (int l : levels) total += l;
        if (total <= max_exc) indices.push_back(i);
    }
    return indices;
}

namespace {

// Submatrix on the retained basis states.
SparseCMatrix project(const SparseCMatrix& m, const std::vector<int>& basis) {
    std::vector<int> map(m.rows(), -1);
    for (size_t s = 0; s < basis.size(); ++s) map[basis[s]] = static_cast<int>(s);
    std::vector<Eigen::Triplet<Complex>> triplets;
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseCMatrix::InnerIterator it(m, k); it; ++it) {
            const int r = map[it.row()];
            const int c = map[it.col()];
            if (r >= 0 && c >= 0) triplets.emplace_back(r, c, it.value());
        }
    }
    SparseCMatrix out(static_cast<int>(basis.size()), static_cast<int>(basis.size()));
    out.setFromTriplets(triplets.begin(), triplets.end());
    return out;
}

}  // namespace

SteadyStateSolver::SteadyStateSolver(const LindbladModel& model,
                                     double drive_amplitude_rad_s, int max_excitation)
    : model_(model),
      a_full_(embed(destroy(model.hamiltonian.layout().dim(0)), 0,
                    model.hamiltonian.layout())) {
    model_.validate();
    const auto& layout = model_.hamiltonian.layout();
    const int dim_full = model_.hamiltonian.dim();
    if (dim_full > 100) {
        throw std::invalid_argument("steady_state: Hilbert dimension above 100 (Liouvillian 10^4)");
    }

    if (max_excitation >= 0) {
        basis_ = excitation_subspace(layout, max_excitation);
    } else {
        basis_.resize(dim_full);
        for (int i = 0; i < dim_full; ++i) basis_[i] = i;
    }
    const int dim = static_cast<int>(basis_.size());

    OperatorMatrix h_driven = model_.hamiltonian;
    if (drive_amplitude_rad_s != 0.0) {
        OperatorMatrix drive = a_full_;
        drive += a_full_.adjoint();
        h_driven += Complex(drive_amplitude_rad_s) * drive;
    }
    a_sub_ = project(a_full_.sparse(), basis_);
    const SparseCMatrix h_sub = project(h_driven.sparse(), basis_);

    const Complex minus_i(0.0, -1.0);
    SparseCMatrix id(dim, dim);
    id.setIdentity();
    lv_base_ = minus_i * (kron(id, h_sub) - kron(SparseCMatrix(h_sub.transpose()), id));
    for (const auto& ch : model_.channels) {
        if (ch.rate == 0.0) continue;
        const SparseCMatrix c = project(ch.op.sparse(), basis_);
        SparseCMatrix cdc = SparseCMatrix(c.adjoint()) * c;
        lv_base_ += Complex(ch.rate) *
                    (kron(SparseCMatrix(c.conjugate()), c) -
                     Complex(0.5) * kron(id, cdc) -
                     Complex(0.5) * kron(SparseCMatrix(cdc.transpose()), id));
    }

    // Rotating-frame shift: +iω_p(n_row − n_col) on the vec diagonal. Explicit
    // zeros keep the sparsity pattern constant across the sweep.
    const OperatorMatrix n_exc = total_excitation_operator(layout);
    excitation_diff_.resize(dim * dim);
    std::vector<Eigen::Triplet<Complex>> diag_triplets;
    diag_triplets.reserve(static_cast<size_t>(dim) * dim);
    for (int col = 0; col < dim; ++col) {
        for (int row = 0; row < dim; ++row) {
            const int m = col * dim + row;
            excitation_diff_[m] = n_exc.sparse().coeff(basis_[row], basis_[row]).real() -
                                  n_exc.sparse().coeff(basis_[col], basis_[col]).real();
            diag_triplets.emplace_back(m, m, Complex(0.0, 0.0));
        }
    }
    SparseCMatrix explicit_diag(dim * dim, dim * dim);
    explicit_diag.setFromTriplets(diag_triplets.begin(), diag_triplets.end());
    lv_base_ += explicit_diag;
    lv_base_.makeCompressed();
    lv_scale_ = frobenius(lv_base_);
}

SteadyStateResult SteadyStateSolver::solve(double probe_freq_ghz) {
    const int dim = static_cast<int>(basis_.size());
    const int dim_full = model_.hamiltonian.dim();
    const double omega_p = probe_freq_ghz * kRadPerSecPerGhz;

    SparseCMatrix lv = lv_base_;
    for (int m = 0; m < dim * dim; ++m) {
        lv.coeffRef(m, m) += Complex(0.0, omega_p * excitation_diff_[m]);
    }

    SparseCMatrix system = with_trace_row(lv, dim);
    if (!pattern_ready_) {
        lu_.analyzePattern(system);
        pattern_ready_ = true;
    }
    lu_.factorize(system);
    if (lu_.info() != Eigen::Success) {
        report_degenerate(lv);
    }
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim * dim);
    rhs[kTraceRow] = 1.0;
    Eigen::VectorXcd x = lu_.solve(rhs);

    const double residual = (lv * x).norm();
    const double scale = std::max(lv_scale_, omega_p * std::sqrt(double(dim)));
    if (!x.allFinite() || residual > 1e-9 * std::max(scale, 1.0)) {
        report_degenerate(lv);
    }

    DenseMatrix rho_sub = Eigen::Map<DenseMatrix>(x.data(), dim, dim);
    rho_sub = 0.5 * (rho_sub + rho_sub.adjoint().eval());

    SteadyStateResult res;
    res.a_expectation = (DenseMatrix(a_sub_) * rho_sub).trace();
    res.photon_number =
        (DenseMatrix(SparseCMatrix(a_sub_.adjoint()) * a_sub_) * rho_sub).trace().real();
    res.residual_rel = residual / std::max(scale, 1e-300);
    if (dim == dim_full) {
        res.rho = std::move(rho_sub);
    } else {
        res.rho = DenseMatrix::Zero(dim_full, dim_full);
        for (int r = 0; r < dim; ++r) {
            for (int c = 0; c < dim; ++c) {
                res.rho(basis_[r], basis_[c]) = rho_sub(r, c);
            }
        }
    }
    return res;
}

SteadyStateResult steady_state(const LindbladModel& model, const DriveSpec& drive) {
    SteadyStateSolver solver(model, drive.amplitude_rad_s);
    return solver.solve(drive.probe_freq_ghz);
}

std::vector<CollapseChannel> collapse_channels_for(const DeviceConfig& config,
                                                   const HilbertLayout& layout,
                                                   const std::vector<int>& active_qubits,
                                                   bool qubit_thermal_channels) {
    if (static_cast<int>(active_qubits.size()) + 1 != layout.subsystem_count()) {
        throw std::invalid_argument("collapse_channels_for: layout does not match active set");
    }
    std::vector<CollapseChannel> channels;
    const double kappa = config.resonator.gamma0_mhz * 1e6 * kTwoPi;
    const double n_bar = config.thermal_photons();

    channels.push_back({embed(destroy(layout.dim(0)), 0, layout),
                        kappa * (1.0 + n_bar), "cavity-decay"});
    if (n_bar > 0.0) {
        channels.push_back({embed(DenseMatrix(destroy(layout.dim(0)).adjoint()), 0, layout),
                            kappa * n_bar, "cavity-thermal"});
    }

    for (size_t s = 0; s < active_qubits.size(); ++s) {
        const int q = active_qubits[s];
        if (q < 0 || q >= static_cast<int>(config.qubits.size())) {
            throw std::out_of_range("collapse_channels_for: qubit index out of range");
        }
        const auto& spec = config.qubits[q];
        if (spec.t2_s > 2.0 * spec.t1_s + 1e-15) {
            throw std::invalid_argument("collapse_channels_for: T2 exceeds 2·T1");
        }
        const int slot = static_cast<int>(s) + 1;
        const int d = layout.dim(slot);
        channels.push_back({embed(destroy(d), slot, layout), 1.0 / spec.t1_s,
                            "qubit" + std::to_string(q + 1) + "-decay"});
        const double gamma_phi = pure_dephasing_rate(spec.t1_s, spec.t2_s);
        if (gamma_phi > 0.0) {
            // Number-operator dephasing at 2/T_φ dephases the ge coherence at
            // exactly 1/T_φ (and reduces to σz/2 scaling for two levels).
            channels.push_back({embed(number_op(d), slot, layout), 2.0 * gamma_phi,
                                "qubit" + std::to_string(q + 1) + "-dephasing"});
        }
        if (qubit_thermal_channels) {
            const double f_ge = spec.ej_max_ghz > 0.0
                                    ? transmon_freq_ge(spec.ej_max_ghz, spec.ec_ghz)
                                    : config.resonator.omega_r_ghz;
            const double n_q = bose_einstein_occupation(f_ge, config.temperature_mk);
            if (n_q > 0.0) {
                channels.push_back({embed(DenseMatrix(destroy(d).adjoint()), slot, layout),
                                    n_q / spec.t1_s,
                                    "qubit" + std::to_string(q + 1) + "-thermal"});
            }
        }
    }
    return channels;
}

ActiveModel build_active_model(const DeviceConfig& config, const BiasVector& bias,
                               const SpectrumOptions& options) {
    config.validate();
    bias.validate();
    const double omega_r = config.resonator.omega_r_ghz;

    std::vector<int> active;
    std::vector<double> folded_g, folded_delta;
    std::vector<double> freqs(config.qubits.size());
    for (size_t q = 0; q < config.qubits.size(); ++q) {
        freqs[q] = qubit_freq_of_current(config, static_cast<int>(q), bias);
        const bool three_level = static_cast<int>(q) == options.three_level_qubit;
        const bool near = std::abs(freqs[q] - omega_r) <= options.active_window_ghz;
        if (three_level || (near && options.three_level_qubit < 0)) {
            active.push_back(static_cast<int>(q));
        } else {
            folded_g.push_back(config.qubits[q].g_ge_mhz);
            folded_delta.push_back(freqs[q] - omega_r);
        }
    }

    const double drift_mhz =
        folded_g.empty() ? 0.0 : dispersive_drift(folded_g, folded_delta);
    const double omega_r_eff = omega_r - drift_mhz * 1e-3;

    ActiveModel out;
    out.omega_r_eff_ghz = omega_r_eff;
    out.active_qubits = active;
    out.kappa_total_per_s = config.resonator.gamma0_mhz * 1e6 * kTwoPi;

    OperatorMatrix h = [&] {
        if (options.three_level_qubit >= 0) {
            if (active.size() != 1) {
                throw std::invalid_argument(
                    "build_active_model: three-level mode supports exactly one active qubit");
            }
            const auto& spec = config.qubits[active[0]];
            const double ej = ej_of_flux(
                spec.ej_max_ghz,
                flux_from_currents(config.mutuals, bias)[active[0]]);
            const auto levels = transmon_levels(ej, spec.ec_ghz,
                                                kDefaultChargeTruncation, 3);
            ThreeLevelModel model;
            model.omega_r_ghz = omega_r_eff;
            model.n_truncation = config.resonator.n_truncation;
            model.qubits.push_back({levels[1], levels[2], spec.g_ge_mhz,
                                    spec.effective_g_ef_mhz()});
            return build_three_level_hamiltonian(model);
        }
        TCModel model;
        model.omega_r_ghz = omega_r_eff;
        model.layout = tc_layout(config.resonator.n_truncation,
                                 static_cast<int>(active.size()));
        for (int q : active) {
            model.omega_q_ghz.push_back(freqs[q]);
            model.g_mhz.push_back(config.qubits[q].g_ge_mhz);
        }
        return build_tc_hamiltonian(model);
    }();

    out.lindblad.hamiltonian = Complex(kRadPerSecPerGhz) * h;
    out.lindblad.n_thermal = config.thermal_photons();
    out.lindblad.channels = collapse_channels_for(
        config, h.layout(), active, options.qubit_thermal_channels);
    return out;
}

TransmissionTrace transmission_spectrum(const DeviceConfig& config,
                                        const BiasVector& bias,
                                        const std::vector<double>& probe_grid_ghz,
                                        const SpectrumOptions& options) {
    for (size_t i = 1; i < probe_grid_ghz.size(); ++i) {
        if (probe_grid_ghz[i] <= probe_grid_ghz[i - 1]) {
            throw std::invalid_argument("transmission_spectrum: probe grid must be sorted");
        }
    }
    ActiveModel model = build_active_model(config, bias, options);
    const double kappa = model.kappa_total_per_s;
    const double eta = options.amplitude_rad_s
                           ? *options.amplitude_rad_s
                           : 0.5 * kappa * std::sqrt(options.drive_photons);

    TransmissionTrace trace;
    trace.probe_freq_ghz = probe_grid_ghz;
    trace.s21.assign(probe_grid_ghz.size(), Complex(0.0, 0.0));
    trace.meta.bias_currents_a = bias.currents_a;
    trace.meta.drive_amplitude_rad_s = eta;
    trace.meta.kappa_c_mhz = model.active_qubits.empty()
                                 ? config.resonator.gamma0_mhz
                                 : 0.5 * config.resonator.gamma0_mhz;
    trace.meta.source = "transmission_spectrum";

    // Normalization: a bare cavity driven on resonance settles at −2iη/κ.
    const Complex norm =
        eta != 0.0 ? Complex(0.0, 0.5 * kappa / eta) : Complex(1.0, 0.0);

    const int n_threads =
        std::max(1, std::min<int>(options.threads,
                                  static_cast<int>(probe_grid_ghz.size())));
    if (n_threads == 1) {
        SteadyStateSolver solver(model.lindblad, eta, options.max_excitation);
        for (size_t i = 0; i < probe_grid_ghz.size(); ++i) {
            trace.s21[i] = norm * solver.solve(probe_grid_ghz[i]).a_expectation;
        }
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                SteadyStateSolver solver(model.lindblad, eta, options.max_excitation);
                for (size_t i = next.fetch_add(1); i < probe_grid_ghz.size();
                     i = next.fetch_add(1)) {
                    trace.s21[i] = norm * solver.solve(probe_grid_ghz[i]).a_expectation;
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return trace;
}

}  // namespace tcs
