#include "vpair/oracle.hpp"

#include <nlohmann/json.hpp>

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace vpair::oracle {

namespace {

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) =
                a(i, j) * b;
    return out;
}

Vec vectorize(const Mat& m) {
    return Eigen::Map<const Vec>(m.data(), m.size());
}

Mat unvectorize(const Vec& v, int n) {
    return Eigen::Map<const Mat>(v.data(), n, n);
}

void check_density(const Mat& rho, int dim) {
    if (rho.rows() != dim || rho.cols() != dim)
        throw std::invalid_argument("density matrix has wrong dimension");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
        throw std::invalid_argument("density matrix is not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > 1e-6 ||
        std::abs(rho.trace().imag()) > 1e-8)
        throw std::invalid_argument("density matrix trace is not 1");
}

}  // namespace

MasterEquation two_atom_master(const ModelParams& params) {
    return {build_h_cond(params).matrix(),
            to_jump_channels(reset_channels(params))};
}

MasterEquation single_atom_v_master(const ModelParams& params) {
    Mat j = Mat::Zero(3, 3);
    j(0, 2) = 1.0;
    return {build_single_atom_h_cond(params).matrix(),
            {{params.a3, j, 's'}}};
}

MasterEquation driven_two_level_master(double omega, double gamma) {
    if (!(omega >= 0.0) || !(gamma > 0.0))
        throw std::domain_error(
            "driven_two_level_master: need omega >= 0 and gamma > 0");
    const std::complex<double> I(0.0, 1.0);
    Mat h = Mat::Zero(2, 2);
    h(0, 1) = omega / 2.0;
    h(1, 0) = omega / 2.0;
    h(1, 1) = -0.5 * I * gamma;
    Mat j = Mat::Zero(2, 2);
    j(0, 1) = 1.0;
    return {h, {{gamma, j, 's'}}};
}

Mat reset_apply(const MasterEquation& me, const Mat& rho) {
    Mat out = Mat::Zero(me.dim(), me.dim());
    for (const auto& ch : me.channels)
        out += ch.weight * (ch.op * rho * ch.op.adjoint());
    return out;
}

Mat liouvillian_apply(const MasterEquation& me, const Mat& rho) {
    const std::complex<double> I(0.0, 1.0);
    return -I * (me.h * rho - rho * me.h.adjoint()) + reset_apply(me, rho);
}

double photon_rate(const MasterEquation& me, const Mat& rho) {
    return reset_apply(me, rho).trace().real();
}

Mat liouvillian_matrix(const MasterEquation& me) {
    const int n = me.dim();
    const std::complex<double> I(0.0, 1.0);
    const Mat id = Mat::Identity(n, n);
    Mat l = -I * kron(id, me.h) + I * kron(me.h.conjugate(), id);
    for (const auto& ch : me.channels)
        l += ch.weight * kron(ch.op.conjugate(), ch.op);
    return l;
}

MasterEquation restrict_to(const MasterEquation& me,
                           const std::vector<int>& keep, double tol) {
    const int n = me.dim();
    if (keep.empty())
        throw std::invalid_argument("restrict_to: empty index set");
    std::vector<bool> kept(n, false);
    for (int idx : keep) {
        if (idx < 0 || idx >= n)
            throw std::invalid_argument("restrict_to: index out of range");
        kept[idx] = true;
    }
    auto leaks = [&](const Mat& m) {
        for (int j : keep)
            for (int i = 0; i < n; ++i)
                if (!kept[i] && std::abs(m(i, j)) > tol) return true;
        return false;
    };
    if (leaks(me.h))
        throw std::invalid_argument(
            "restrict_to: Hamiltonian couples the subset to its complement");
    for (const auto& ch : me.channels)
        if (leaks(ch.op))
            throw std::invalid_argument(
                "restrict_to: jump channel couples the subset to its "
                "complement");

    const int m = static_cast<int>(keep.size());
    MasterEquation sub;
    sub.h = Mat(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) sub.h(a, b) = me.h(keep[a], keep[b]);
    for (const auto& ch : me.channels) {
        Mat op(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) op(a, b) = ch.op(keep[a], keep[b]);
        sub.channels.push_back({ch.weight, op, ch.label});
    }
    return sub;
}

Mat evolve_density(const MasterEquation& me, const Mat& rho0, double t,
                   const EvolveOptions& opts) {
    namespace ode = boost::numeric::odeint;
    const int n = me.dim();
    check_density(rho0, n);
    if (t < 0.0) throw std::domain_error("evolve_density: negative time");
    if (t == 0.0) return rho0;

    const int nn = n * n;
    using State = std::vector<double>;
    auto pack = [nn](const Mat& rho, State& x) {
        const std::complex<double>* p = rho.data();
        for (int k = 0; k < nn; ++k) {
            x[k] = p[k].real();
            x[nn + k] = p[k].imag();
        }
    };
    auto unpack = [n, nn](const State& x) {
        Mat rho(n, n);
        std::complex<double>* p = rho.data();
        for (int k = 0; k < nn; ++k) p[k] = {x[k], x[nn + k]};
        return rho;
    };
    auto sys = [&](const State& x, State& dxdt, double) {
        dxdt.resize(2 * nn);
        pack(liouvillian_apply(me, unpack(x)), dxdt);
    };

    State x(2 * nn);
    pack(rho0, x);
    auto stepper = ode::make_controlled(opts.abs_tol, opts.rel_tol,
                                        ode::runge_kutta_dopri5<State>());
    const double trace0 = rho0.trace().real();
    double time = 0.0;
    double dt = std::min(opts.initial_dt, t);
    Eigen::SelfAdjointEigenSolver<Mat> eig;
    while (time < t) {
        dt = std::min(dt, t - time);
        if (stepper.try_step(sys, x, time, dt) == ode::fail) {
            if (dt < 1e-14 * std::max(1.0, t)) {
                std::ostringstream msg;
                msg << "evolve_density: step size underflow at t=" << time
                    << " (dt=" << dt << ")";
                throw std::runtime_error(msg.str());
            }
            continue;
        }
        const Mat rho = unpack(x);
        if (std::abs(rho.trace().real() - trace0) > 1e-9 ||
            std::abs(rho.trace().imag()) > 1e-9)
            throw std::runtime_error(
                "evolve_density: trace drift beyond 1e-9 (generator is not "
                "trace preserving)");
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
            throw std::runtime_error(
                "evolve_density: Hermiticity lost along the integration");
        eig.compute(0.5 * (rho + rho.adjoint()),
                    Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < opts.positivity_floor) {
            std::ostringstream msg;
            msg << "evolve_density: density eigenvalue "
                << eig.eigenvalues().minCoeff() << " below floor at t="
                << time;
            throw std::runtime_error(msg.str());
        }
    }
    return unpack(x);
}

Mat steady_state(const MasterEquation& me) {
    const int n = me.dim();
    const int nn = n * n;
    if (nn == 1) return Mat::Ones(1, 1);
    const Mat l = liouvillian_matrix(me);
    Eigen::JacobiSVD<Mat> svd(l, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    if (!(smax > 0.0))
        throw std::runtime_error(
            "steady_state: zero generator; every state is stationary");
    if (sv(nn - 2) <= 1e-10 * smax)
        throw std::runtime_error(
            "steady_state: degenerate null space (disconnected sectors); "
            "restrict to an invariant sector first");
    Mat rho = unvectorize(svd.matrixV().col(nn - 1), n);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    const double tr = rho.trace().real();
    if (std::abs(tr) < 1e-10)
        throw std::runtime_error(
            "steady_state: null vector has vanishing trace");
    rho /= tr;
    const double residual = vectorize(liouvillian_apply(me, rho)).norm();
    if (residual > 1e-10) {
        std::ostringstream msg;
        msg << "steady_state: residual " << residual << " exceeds 1e-10";
        throw std::runtime_error(msg.str());
    }
    return rho;
}

namespace {

bool same_params(const ModelParams& a, const ModelParams& b) {
    return a.a3 == b.a3 && a.a2 == b.a2 && a.omega2 == b.omega2 &&
           a.omega3 == b.omega3 && a.kr == b.kr && a.theta3 == b.theta3 &&
           a.include_c3 == b.include_c3;
}

constexpr int kBlockSize = 256;

struct BlockMoments {
    std::vector<Mat> sum;
    std::vector<Eigen::MatrixXd> sum_sq_re;
    std::vector<Eigen::MatrixXd> sum_sq_im;
};

}  // namespace

TrajectoryMoments mean_trajectory_state(const std::vector<EmissionRecord>& records,
                                        const std::vector<double>& times,
                                        int threads) {
    if (records.empty())
        throw std::invalid_argument("mean_trajectory_state: no records");
    if (times.empty())
        throw std::invalid_argument("mean_trajectory_state: no grid times");
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] < 0.0 || (k > 0 && times[k] <= times[k - 1]))
            throw std::invalid_argument(
                "mean_trajectory_state: grid times must be increasing and "
                "non-negative");
    }
    const auto& first = records.front();
    for (const auto& rec : records) {
        if (!same_params(rec.params, first.params) ||
            rec.initial != first.initial || rec.duration != first.duration)
            throw std::invalid_argument(
                "mean_trajectory_state: records have mismatched parameters");
        if (times.back() > rec.duration)
            throw std::invalid_argument(
                "mean_trajectory_state: grid extends past record duration");
    }

    const int n = static_cast<int>(records.size());
    const int nt = static_cast<int>(times.size());
    const int dim = hilbert::dim;
    const int nblocks = (n + kBlockSize - 1) / kBlockSize;

    std::vector<BlockMoments> blocks(nblocks);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> failures;

    unsigned want = threads > 0 ? static_cast<unsigned>(threads)
                                : std::thread::hardware_concurrency();
    if (want == 0) want = 1;
    want = std::min<unsigned>(want, static_cast<unsigned>(nblocks));
    failures.resize(want);

    auto worker = [&](unsigned slot) {
        try {
            for (int b = next.fetch_add(1); b < nblocks;
                 b = next.fetch_add(1)) {
                BlockMoments& bm = blocks[b];
                bm.sum.assign(nt, Mat::Zero(dim, dim));
                bm.sum_sq_re.assign(nt, Eigen::MatrixXd::Zero(dim, dim));
                bm.sum_sq_im.assign(nt, Eigen::MatrixXd::Zero(dim, dim));
                const int lo = b * kBlockSize;
                const int hi = std::min(n, lo + kBlockSize);
                for (int r = lo; r < hi; ++r) {
                    TrajectoryReplay replay(records[r], false);
                    for (int k = 0; k < nt; ++k) {
                        const Vec psi = replay.state_at(times[k]);
                        const Mat outer = psi * psi.adjoint();
                        bm.sum[k] += outer;
                        bm.sum_sq_re[k] +=
                            outer.real().cwiseProduct(outer.real());
                        bm.sum_sq_im[k] +=
                            outer.imag().cwiseProduct(outer.imag());
                    }
                }
            }
        } catch (...) {
            failures[slot] = std::current_exception();
        }
    };

    if (want == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(want);
        for (unsigned s = 0; s < want; ++s) pool.emplace_back(worker, s);
        for (auto& th : pool) th.join();
    }
    for (const auto& failure : failures)
        if (failure) std::rethrow_exception(failure);

    TrajectoryMoments out;
    out.times = times;
    out.n = n;
    out.mean.assign(nt, Mat::Zero(dim, dim));
    out.var_re.assign(nt, Eigen::MatrixXd::Zero(dim, dim));
    out.var_im.assign(nt, Eigen::MatrixXd::Zero(dim, dim));
    for (int k = 0; k < nt; ++k) {
        Mat sum = Mat::Zero(dim, dim);
        Eigen::MatrixXd sq_re = Eigen::MatrixXd::Zero(dim, dim);
        Eigen::MatrixXd sq_im = Eigen::MatrixXd::Zero(dim, dim);
        for (int b = 0; b < nblocks; ++b) {
            sum += blocks[b].sum[k];
            sq_re += blocks[b].sum_sq_re[k];
            sq_im += blocks[b].sum_sq_im[k];
        }
        out.mean[k] = sum / static_cast<double>(n);
        if (n > 1) {
            const double bias = static_cast<double>(n) / (n - 1.0);
            out.var_re[k] = bias * (sq_re / n -
                                    out.mean[k].real().cwiseProduct(
                                        out.mean[k].real()))
                                       .cwiseMax(0.0);
            out.var_im[k] = bias * (sq_im / n -
                                    out.mean[k].imag().cwiseProduct(
                                        out.mean[k].imag()))
                                       .cwiseMax(0.0);
        }
    }
    return out;
}

EnsembleCheck ensemble_check(const std::vector<EmissionRecord>& records,
                             const std::vector<double>& times, int threads) {
    const TrajectoryMoments mom = mean_trajectory_state(records, times,
                                                        threads);
    const auto& first = records.front();
    const MasterEquation me = two_atom_master(first.params);
    Mat rho =
        hilbert::StateVector::basis_state(first.initial).amp *
        hilbert::StateVector::basis_state(first.initial).amp.adjoint();

    EnsembleCheck out;
    out.times = times;
    out.n = mom.n;
    out.insufficient_stats = mom.n < 100;
    double t_prev = 0.0;
    const int dim = hilbert::dim;
    for (std::size_t k = 0; k < times.size(); ++k) {
        rho = evolve_density(me, rho, times[k] - t_prev);
        t_prev = times[k];
        const Mat dev = mom.mean[k] - rho;
        Eigen::MatrixXd z(dim, dim);
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                // Entries fed by rare events (e.g. double shelving) can miss
                // every contributing trajectory at finite n, leaving a near-
                // zero sample variance while the true mean is O(3/n): the
                // rule-of-three bound on an unobserved event. Floor the
                // standard error there so the z score stays meaningful.
                const double se_floor = 3.0 / static_cast<double>(mom.n);
                auto score = [&](double d, double var) {
                    const double ad = std::abs(d);
                    if (ad <= 1e-8) return 0.0;
                    const double se = std::sqrt(var / mom.n);
                    return ad / std::max(se, se_floor);
                };
                z(i, j) = std::max(
                    score(dev(i, j).real(), mom.var_re[k](i, j)),
                    score(dev(i, j).imag(), mom.var_im[k](i, j)));
            }
        }
        out.z_per_time.push_back(z);
        out.max_dev_per_time.push_back(dev.cwiseAbs().maxCoeff());
        out.max_abs_dev = std::max(out.max_abs_dev,
                                   out.max_dev_per_time.back());
        out.max_z = std::max(out.max_z, z.maxCoeff());
    }
    out.pass = out.insufficient_stats || out.max_z <= 4.0;
    return out;
}

nlohmann::json EnsembleCheck::report() const {
    nlohmann::json j;
    j["n"] = n;
    j["times"] = times;
    j["max_abs_dev"] = max_abs_dev;
    j["max_z"] = max_z;
    j["insufficient_stats"] = insufficient_stats;
    j["pass"] = pass;
    j["max_dev_per_time"] = max_dev_per_time;
    auto& zs = j["z_per_time"] = nlohmann::json::array();
    for (const auto& z : z_per_time) {
        nlohmann::json rows = nlohmann::json::array();
        for (int i = 0; i < z.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < z.cols(); ++c) row.push_back(z(i, c));
            rows.push_back(row);
        }
        zs.push_back(rows);
    }
    return j;
}

}  // namespace vpair::oracle
