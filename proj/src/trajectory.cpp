#include "vpair/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace vpair {

namespace {

constexpr double kWaitRelTol = 1e-9;

// Bisection-safeguarded secant iteration in log(survival); log P0 is exactly
// linear in t for a single decay channel, so the secant step usually lands
// within a few iterations. Requires p_lo > u >= p_hi.
double invert_survival(const ConditionalEvolution& evo, double u, double lo,
                       double p_lo, double hi, double p_hi) {
    double f_lo = std::log(p_lo / u);
    double f_hi = p_hi > 0.0 ? std::log(p_hi / u) : -1e300;
    for (int iter = 0; iter < 300 && hi - lo > kWaitRelTol * hi; ++iter) {
        double mid;
        if (f_hi > -1e299) {
            mid = lo + (hi - lo) * (f_lo / (f_lo - f_hi));
            const double margin = 1e-3 * (hi - lo);
            if (!(mid > lo + margin && mid < hi - margin) || (iter & 3) == 3)
                mid = 0.5 * (lo + hi);
        } else {
            mid = 0.5 * (lo + hi);
        }
        const double p_mid = evo.survival(mid);
        if (p_mid > u) {
            lo = mid;
            f_lo = std::log(p_mid / u);
        } else {
            hi = mid;
            f_hi = p_mid > 0.0 ? std::log(p_mid / u) : -1e300;
        }
    }
    return 0.5 * (lo + hi);
}

struct JumpSelection {
    int index;
    Vec post;  // normalized
    std::vector<double> prob;
};

JumpSelection select_jump(const std::vector<JumpChannel>& channels,
                          const Vec& at_emission, double u) {
    const int m = static_cast<int>(channels.size());
    std::vector<Vec> states(m);
    std::vector<double> q(m);
    double total = 0.0;
    for (int c = 0; c < m; ++c) {
        states[c] = channels[c].op * at_emission;
        q[c] = channels[c].weight * states[c].squaredNorm();
        total += q[c];
    }
    if (!(total > 0.0))
        throw std::logic_error(
            "jump selection: emission sampled from a non-emitting state");
    JumpSelection sel;
    sel.prob.resize(m);
    for (int c = 0; c < m; ++c) sel.prob[c] = q[c] / total;
    const double target = u * total;
    double acc = 0.0;
    sel.index = m - 1;
    for (int c = 0; c < m; ++c) {
        acc += q[c];
        if (target < acc) {
            sel.index = c;
            break;
        }
    }
    sel.post = states[sel.index] / std::sqrt(states[sel.index].squaredNorm());
    return sel;
}

double effective_re_c3(const ModelParams& params) {
    if (!params.include_c3) return 0.0;
    if (params.kr < 0.1)
        throw std::domain_error(
            "kr below 0.1: level shift dominates and the rotating frame "
            "used here is invalid");
    const double re_c3 = coupling_constant(params.kr, params.theta3,
                                           params.a3).real();
    if (std::abs(re_c3) > params.a3 * (1.0 + 1e-12))
        throw std::runtime_error("collective decay weight a3 - |Re C3| "
                                 "negative: coupling evaluation failed");
    return re_c3;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(seed + (index + 1) * 0x9e3779b97f4a7c15ull);
}

double open_unit_interval(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

ResetChannels reset_channels(const ModelParams& params) {
    params.validate();
    ResetChannels ch;
    ch.a3 = params.a3;
    ch.re_c3 = effective_re_c3(params);
    ch.weight_plus = params.a3 + ch.re_c3;
    ch.weight_minus = params.a3 - ch.re_c3;
    const Mat s1 = hilbert::sigma_minus(1, 3);
    const Mat s2 = hilbert::sigma_minus(2, 3);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    ch.r_plus = (s1 + s2) * inv_sqrt2;
    ch.r_minus = (s1 - s2) * inv_sqrt2;
    return ch;
}

std::vector<JumpChannel> to_jump_channels(const ResetChannels& channels) {
    return {{channels.weight_plus, channels.r_plus, '+'},
            {channels.weight_minus, channels.r_minus, '-'}};
}

double sample_waiting_time(const ConditionalGenerator& gen,
                           const hilbert::StateVector& psi, double u,
                           double t_cap, double t_scale) {
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("sample_waiting_time: u must lie in (0,1)");
    if (!(t_cap > 0.0) || !(t_scale > 0.0))
        throw std::domain_error("sample_waiting_time: t_cap and t_scale "
                                "must be positive");
    if (std::abs(psi.amp.squaredNorm() - 1.0) > 1e-6)
        throw std::invalid_argument("sample_waiting_time: state must be "
                                    "normalized");
    const ConditionalEvolution evo(gen, psi);
    double lo = 0.0;
    double p_lo = 1.0;
    double hi = std::min(t_scale, t_cap);
    double p_hi = evo.survival(hi);
    while (p_hi > u) {
        if (hi >= t_cap)
            throw std::runtime_error(
                "sample_waiting_time: no-photon probability still above u "
                "at t_cap; state is effectively dark");
        lo = hi;
        p_lo = p_hi;
        hi = std::min(2.0 * hi, t_cap);
        p_hi = evo.survival(hi);
    }
    return invert_survival(evo, u, lo, p_lo, hi, p_hi);
}

ResetOutcome apply_reset(const ResetChannels& channels,
                         const hilbert::StateVector& psi, double u) {
    if (!(u > 0.0 && u < 1.0))
        throw std::domain_error("apply_reset: u must lie in (0,1)");
    const auto jump = to_jump_channels(channels);
    const JumpSelection sel = select_jump(jump, psi.amp, u);
    ResetOutcome out;
    out.channel = jump[sel.index].label;
    out.state = hilbert::StateVector::from(sel.post);
    out.p_plus = sel.prob[0];
    out.p_minus = sel.prob[1];
    return out;
}

Mat reset_density(const ResetChannels& channels, const Mat& rho) {
    const Mat s1 = hilbert::sigma_minus(1, 3);
    const Mat s2 = hilbert::sigma_minus(2, 3);
    return channels.a3 * (s1 * rho * s1.adjoint() + s2 * rho * s2.adjoint()) +
           channels.re_c3 *
               (s1 * rho * s2.adjoint() + s2 * rho * s1.adjoint());
}

std::vector<Emission> run_jump_trajectory(const ConditionalGenerator& gen,
                                          const std::vector<JumpChannel>& channels,
                                          Vec psi0, double duration,
                                          std::mt19937_64& rng,
                                          double t_scale) {
    if (!(duration > 0.0))
        throw std::domain_error("run_jump_trajectory: duration must be "
                                "positive");
    if (channels.empty())
        throw std::invalid_argument("run_jump_trajectory: no jump channels");
    const double n2 = psi0.squaredNorm();
    if (!(n2 > 0.0))
        throw std::domain_error("run_jump_trajectory: zero initial state");
    Vec psi = psi0 / std::sqrt(n2);

    std::vector<Emission> events;
    double t = 0.0;
    while (true) {
        const ConditionalEvolution evo(gen, hilbert::StateVector::from(psi));
        const double rem = duration - t;
        const double u = open_unit_interval(rng);
        const double p_rem = evo.survival(rem);
        if (u < p_rem) break;  // no further photon inside the window

        double lo = 0.0;
        double p_lo = 1.0;
        double hi = std::min(t_scale, rem);
        double p_hi = evo.survival(hi);
        while (p_hi > u) {
            lo = hi;
            p_lo = p_hi;
            hi = std::min(2.0 * hi, rem);
            p_hi = evo.survival(hi);
        }
        const double wait = invert_survival(evo, u, lo, p_lo, hi, p_hi);
        const Vec at_emission = evo.state_at(wait);
        const double u_reset = open_unit_interval(rng);
        const JumpSelection sel = select_jump(channels, at_emission, u_reset);

        t += wait;
        if (!events.empty() && !(t > events.back().time))
            t = std::nextafter(events.back().time,
                               std::numeric_limits<double>::infinity());
        events.push_back({t, channels[sel.index].label});
        psi = sel.post;
    }
    return events;
}

EmissionRecord run_trajectory(const ModelParams& params,
                              const std::string& initial, double duration,
                              std::uint64_t seed) {
    const ConditionalGenerator gen = build_h_cond(params);
    const auto channels = to_jump_channels(reset_channels(params));
    const Vec psi0 = hilbert::StateVector::basis_state(initial).amp;
    std::mt19937_64 rng(mix64(seed));

    EmissionRecord record;
    record.params = params;
    record.seed = seed;
    record.initial = initial;
    record.duration = duration;
    record.events = run_jump_trajectory(gen, channels, psi0, duration, rng,
                                        1.0 / params.a3);
    return record;
}

std::vector<EmissionRecord> run_ensemble(const ModelParams& params,
                                         const std::string& initial,
                                         double duration, int n,
                                         std::uint64_t seed, int threads) {
    if (n <= 0) throw std::domain_error("run_ensemble: n must be positive");
    if (threads < 0)
        throw std::domain_error("run_ensemble: negative thread count");
    // Validate once up front so configuration errors surface on the calling
    // thread rather than inside a worker.
    const ConditionalGenerator gen = build_h_cond(params);
    const auto channels = to_jump_channels(reset_channels(params));
    const Vec psi0 = hilbert::StateVector::basis_state(initial).amp;

    unsigned want = threads > 0 ? static_cast<unsigned>(threads)
                                : std::thread::hardware_concurrency();
    if (want == 0) want = 1;
    want = std::min<unsigned>(want, static_cast<unsigned>(n));

    std::vector<EmissionRecord> records(n);
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> failures(want);

    auto worker = [&](unsigned slot) {
        try {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                std::mt19937_64 rng(mix64(substream_seed(seed, i)));
                EmissionRecord& rec = records[i];
                rec.params = params;
                rec.seed = substream_seed(seed, i);
                rec.initial = initial;
                rec.duration = duration;
                rec.events = run_jump_trajectory(gen, channels, psi0,
                                                 duration, rng,
                                                 1.0 / params.a3);
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
    return records;
}

TrajectoryReplay::TrajectoryReplay(const EmissionRecord& record, bool verify)
    : record_(record),
      gen_(build_h_cond(record.params)),
      channels_(reset_channels(record.params)),
      rng_(mix64(record.seed)),
      verify_(verify),
      evo_(gen_, hilbert::StateVector::basis_state(record.initial)) {
    for (std::size_t k = 1; k < record_.events.size(); ++k)
        if (!(record_.events[k].time > record_.events[k - 1].time))
            throw std::runtime_error(
                "corrupted record: emission times not increasing");
    if (!record_.events.empty() &&
        !(record_.events.back().time <= record_.duration))
        throw std::runtime_error(
            "corrupted record: emission after stated duration");
}

void TrajectoryReplay::process_event(const Emission& event) {
    const double wait = event.time - segment_start_;
    const Vec at_emission = evo_.state_at(wait);
    double u_reset;
    if (verify_) {
        const double u_wait = open_unit_interval(rng_);
        if (std::abs(evo_.survival(wait) - u_wait) > 1e-6)
            throw std::runtime_error(
                "corrupted record: waiting time inconsistent with the "
                "record's random stream (norm mismatch)");
        u_reset = open_unit_interval(rng_);
    } else {
        u_reset = 0.5;
    }
    const ResetOutcome out =
        apply_reset(channels_, hilbert::StateVector::from(at_emission),
                    u_reset);
    if (verify_ && out.channel != event.channel)
        throw std::runtime_error(
            "corrupted record: reset channel inconsistent with the "
            "record's random stream");
    hilbert::StateVector post = out.state;
    if (!verify_) {
        // Without the random stream the recorded label is authoritative.
        const Mat& op = event.channel == '+' ? channels_.r_plus
                                             : channels_.r_minus;
        Vec v = op * at_emission;
        const double n2 = v.squaredNorm();
        if (!(n2 > 0.0))
            throw std::runtime_error(
                "corrupted record: recorded channel annihilates the state");
        post = hilbert::StateVector::from(v / std::sqrt(n2));
    }
    segment_start_ = event.time;
    evo_ = ConditionalEvolution(gen_, post);
}

Vec TrajectoryReplay::state_at(double t) {
    if (t < 0.0 || t > record_.duration)
        throw std::domain_error("replay time outside [0, duration]");
    if (t < segment_start_)
        throw std::domain_error("replay time moved backwards");
    while (next_event_ < record_.events.size() &&
           record_.events[next_event_].time <= t) {
        process_event(record_.events[next_event_]);
        ++next_event_;
    }
    Vec psi = evo_.state_at(t - segment_start_);
    const double n2 = psi.squaredNorm();
    if (!(n2 > 0.0))
        throw std::runtime_error("replay reached a zero-norm state");
    return psi / std::sqrt(n2);
}

namespace {

void write_params(std::ostream& os, const ModelParams& p) {
    const auto old = os.precision(17);
    os << "# a3=" << p.a3 << "\n# a2=" << p.a2 << "\n# omega2=" << p.omega2
       << "\n# omega3=" << p.omega3 << "\n# kr=" << p.kr
       << "\n# theta3=" << p.theta3
       << "\n# include_c3=" << (p.include_c3 ? 1 : 0) << "\n";
    os.precision(old);
}

}  // namespace

void save_record(const EmissionRecord& record, std::ostream& os) {
    os << "# vpair emission record v1\n";
    write_params(os, record.params);
    const auto old = os.precision(17);
    os << "# seed=" << record.seed << "\n# initial=" << record.initial
       << "\n# duration=" << record.duration << "\n";
    os << "time,channel\n";
    for (const auto& ev : record.events)
        os << ev.time << ',' << ev.channel << '\n';
    os.precision(old);
    if (!os) throw std::runtime_error("failed writing emission record");
}

void save_record(const EmissionRecord& record, const std::string& path) {
    std::ofstream os(path);
    if (!os)
        throw std::runtime_error("cannot open " + path + " for writing");
    save_record(record, os);
}

EmissionRecord load_record(std::istream& is) {
    EmissionRecord rec;
    bool saw_header = false;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            const std::string value = line.substr(eq + 1);
            if (key == "a3") rec.params.a3 = std::stod(value);
            else if (key == "a2") rec.params.a2 = std::stod(value);
            else if (key == "omega2") rec.params.omega2 = std::stod(value);
            else if (key == "omega3") rec.params.omega3 = std::stod(value);
            else if (key == "kr") rec.params.kr = std::stod(value);
            else if (key == "theta3") rec.params.theta3 = std::stod(value);
            else if (key == "include_c3")
                rec.params.include_c3 = std::stoi(value) != 0;
            else if (key == "seed") rec.seed = std::stoull(value);
            else if (key == "initial") rec.initial = value;
            else if (key == "duration") rec.duration = std::stod(value);
            continue;
        }
        if (line == "time,channel") {
            saw_header = true;
            continue;
        }
        const auto comma = line.find(',');
        if (!saw_header || comma == std::string::npos)
            throw std::runtime_error("malformed emission record line: " +
                                     line);
        Emission ev;
        ev.time = std::stod(line.substr(0, comma));
        const std::string tag = line.substr(comma + 1);
        if (tag != "+" && tag != "-")
            throw std::runtime_error("unknown emission channel: " + tag);
        ev.channel = tag[0];
        rec.events.push_back(ev);
    }
    if (!saw_header)
        throw std::runtime_error("emission record missing column header");
    if (!(rec.duration > 0.0))
        throw std::runtime_error("emission record missing duration");
    return rec;
}

EmissionRecord load_record_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    return load_record(is);
}

}  // namespace vpair
