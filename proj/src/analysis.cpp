#include "vpair/analysis.hpp"

#include "vpair/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace vpair::analysis {

IntensityTrace bin_intensity(const EmissionRecord& record, double dt) {
    if (!(dt > 0.0))
        throw std::domain_error("bin_intensity: bin width must be positive");
    if (record.duration < dt)
        throw std::invalid_argument(
            "bin_intensity: record shorter than one bin");
    IntensityTrace trace;
    trace.dt = dt;
    const auto nbins = static_cast<std::size_t>(record.duration / dt);
    trace.counts.assign(nbins, 0);
    for (const auto& ev : record.events) {
        const auto bin = static_cast<std::size_t>(ev.time / dt);
        if (bin < nbins) ++trace.counts[bin];
    }
    return trace;
}

double reference_intensity(const ModelParams& params) {
    if (!(params.omega3 > 0.0))
        throw std::domain_error("reference_intensity: omega3 must be "
                                "positive");
    const auto me = oracle::driven_two_level_master(params.omega3, params.a3);
    return oracle::photon_rate(me, oracle::steady_state(me));
}

namespace {

std::vector<Segment> merge_bins(const std::vector<int>& classes) {
    std::vector<Segment> segments;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        if (!segments.empty() && segments.back().cls == classes[k])
            segments.back().end = k + 1;
        else
            segments.push_back({classes[k], k, k + 1});
    }
    return segments;
}

void merge_equal_neighbors(std::vector<Segment>& segments) {
    std::vector<Segment> merged;
    for (const auto& s : segments) {
        if (!merged.empty() && merged.back().cls == s.cls)
            merged.back().end = s.end;
        else
            merged.push_back(s);
    }
    segments.swap(merged);
}

}  // namespace

PeriodSequence classify_periods(const IntensityTrace& trace, double i1,
                                const ClassifyConfig& config) {
    if (!(i1 > 0.0))
        throw std::domain_error("classify_periods: reference intensity "
                                "must be positive");
    if (config.min_bins < 1 || !(config.theta01 > 0.0) ||
        !(config.theta12 > config.theta01))
        throw std::invalid_argument("classify_periods: bad configuration");

    PeriodSequence seq;
    seq.i1 = i1;
    seq.theta01 = config.theta01 * i1;
    seq.theta12 = config.theta12 * i1;

    std::vector<int> classes(trace.size());
    for (std::size_t k = 0; k < trace.size(); ++k) {
        const double y = trace.intensity(k);
        classes[k] = y < seq.theta01 ? 0 : (y <= seq.theta12 ? 1 : 2);
    }
    seq.segments = merge_bins(classes);

    while (config.min_bins > 1 && seq.segments.size() > 1) {
        std::size_t shortest = seq.segments.size();
        for (std::size_t k = 0; k < seq.segments.size(); ++k) {
            const auto len = seq.segments[k].length();
            if (len < static_cast<std::size_t>(config.min_bins) &&
                (shortest == seq.segments.size() ||
                 len < seq.segments[shortest].length()))
                shortest = k;
        }
        if (shortest == seq.segments.size()) break;
        std::size_t neighbor;
        if (shortest == 0)
            neighbor = 1;
        else if (shortest + 1 == seq.segments.size())
            neighbor = shortest - 1;
        else
            neighbor = seq.segments[shortest + 1].length() >
                               seq.segments[shortest - 1].length()
                           ? shortest + 1
                           : shortest - 1;
        seq.segments[shortest].cls = seq.segments[neighbor].cls;
        merge_equal_neighbors(seq.segments);
    }
    return seq;
}

std::vector<int> bin_classes(const PeriodSequence& seq, std::size_t nbins) {
    std::vector<int> classes(nbins, 0);
    for (const auto& s : seq.segments)
        for (std::size_t k = s.begin; k < s.end && k < nbins; ++k)
            classes[k] = s.cls;
    return classes;
}

namespace {

struct ClassAccumulator {
    long n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double x) {
        ++n;
        sum += x;
        sum_sq += x * x;
    }
    double mean() const {
        return n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
    }
    double stderr_mean() const {
        if (n == 0) return std::numeric_limits<double>::quiet_NaN();
        if (n == 1) return 0.0;
        const double var = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1));
        return std::sqrt(var / n);
    }
};

}  // namespace

DurationStats duration_stats(const std::vector<PeriodSequence>& seqs,
                             double dt) {
    if (!(dt > 0.0))
        throw std::domain_error("duration_stats: bin width must be positive");
    if (seqs.empty())
        throw std::invalid_argument("duration_stats: no sequences");
    ClassAccumulator acc[3];
    long double_jumps = 0;
    for (const auto& seq : seqs) {
        const auto& segs = seq.segments;
        for (std::size_t k = 0; k + 1 < segs.size(); ++k)
            if ((segs[k].cls == 0 && segs[k + 1].cls == 2) ||
                (segs[k].cls == 2 && segs[k + 1].cls == 0))
                ++double_jumps;
        // first and last segments are truncated by the window
        for (std::size_t k = 1; k + 1 < segs.size(); ++k)
            acc[segs[k].cls].add(segs[k].length() * dt);
    }
    if (acc[0].n + acc[1].n + acc[2].n == 0)
        throw std::runtime_error(
            "duration_stats: fewer than 3 segments; not enough data for "
            "period statistics");

    DurationStats stats;
    stats.t0 = acc[0].mean();
    stats.t1 = acc[1].mean();
    stats.t2 = acc[2].mean();
    stats.se0 = acc[0].stderr_mean();
    stats.se1 = acc[1].stderr_mean();
    stats.se2 = acc[2].stderr_mean();
    stats.n0 = acc[0].n;
    stats.n1 = acc[1].n;
    stats.n2 = acc[2].n;
    stats.double_jumps = double_jumps;
    for (int c = 0; c < 3; ++c)
        if (acc[c].n > 0 && acc[c].mean() < 10.0 * dt)
            stats.warnings.push_back(
                "mean duration of class " + std::to_string(c) +
                " is below 10 bin widths; short periods may be overlooked");
    return stats;
}

DurationStats duration_stats(const PeriodSequence& seq, double dt) {
    if (seq.segments.size() < 3)
        throw std::runtime_error(
            "duration_stats: fewer than 3 segments; not enough data for "
            "period statistics");
    return duration_stats(std::vector<PeriodSequence>{seq}, dt);
}

namespace {

void class2_totals(const PeriodSequence& seq, const IntensityTrace& trace,
                   long& counts, std::size_t& bins) {
    for (const auto& s : seq.segments) {
        if (s.cls != 2) continue;
        for (std::size_t k = s.begin; k < s.end && k < trace.size(); ++k)
            counts += trace.counts[k];
        bins += s.length();
    }
}

}  // namespace

std::optional<double> period2_intensity(const PeriodSequence& seq,
                                        const IntensityTrace& trace) {
    long counts = 0;
    std::size_t bins = 0;
    class2_totals(seq, trace, counts, bins);
    if (bins == 0) return std::nullopt;
    return static_cast<double>(counts) / (static_cast<double>(bins) * trace.dt);
}

std::optional<double> period2_intensity(
    const std::vector<PeriodSequence>& seqs,
    const std::vector<IntensityTrace>& traces) {
    if (seqs.size() != traces.size() || seqs.empty())
        throw std::invalid_argument(
            "period2_intensity: sequence/trace lists must match");
    long counts = 0;
    std::size_t bins = 0;
    for (std::size_t k = 0; k < seqs.size(); ++k)
        class2_totals(seqs[k], traces[k], counts, bins);
    if (bins == 0) return std::nullopt;
    return static_cast<double>(counts) /
           (static_cast<double>(bins) * traces.front().dt);
}

std::vector<SubspacePoint> subspace_trace(const EmissionRecord& record,
                                          double dt) {
    if (!(dt > 0.0))
        throw std::domain_error("subspace_trace: grid spacing must be "
                                "positive");
    TrajectoryReplay replay(record);
    std::vector<SubspacePoint> points;
    const auto npts =
        static_cast<std::size_t>(record.duration / dt * (1.0 + 1e-12)) + 1;
    points.reserve(npts);
    for (std::size_t k = 0; k < npts; ++k) {
        const double t = std::min(k * dt, record.duration);
        const auto psi = hilbert::StateVector::from(replay.state_at(t));
        points.push_back({t, hilbert::subspace_projection(psi, 0),
                          hilbert::subspace_projection(psi, 1),
                          hilbert::subspace_projection(psi, 2)});
    }
    return points;
}

void write_intensity_csv(std::ostream& os, const IntensityTrace& trace,
                         const PeriodSequence& seq) {
    const auto classes = bin_classes(seq, trace.size());
    os << "t,intensity,class\n";
    const auto old = os.precision(12);
    for (std::size_t k = 0; k < trace.size(); ++k)
        os << (k + 0.5) * trace.dt << ',' << trace.intensity(k) << ','
           << classes[k] << '\n';
    os.precision(old);
}

void write_subspace_csv(std::ostream& os,
                        const std::vector<SubspacePoint>& points,
                        const PeriodSequence& seq, double class_dt) {
    const std::size_t nbins =
        seq.segments.empty() ? 0 : seq.segments.back().end;
    const auto classes = bin_classes(seq, nbins);
    os << "t,p0,p1,p2,class\n";
    const auto old = os.precision(12);
    for (const auto& p : points) {
        const auto bin = static_cast<std::size_t>(p.t / class_dt);
        const int cls = bin < classes.size() ? classes[bin] : 0;
        os << p.t << ',' << p.p0 << ',' << p.p1 << ',' << p.p2 << ','
           << cls << '\n';
    }
    os.precision(old);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument(
            "pearson: need two equally sized samples of at least 2 points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        syy += (y[k] - my) * (y[k] - my);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0))
        throw std::invalid_argument("pearson: zero variance sample");
    return sxy / std::sqrt(sxx * syy);
}

std::vector<std::size_t> local_maxima(const std::vector<double>& values) {
    std::vector<std::size_t> maxima;
    for (std::size_t k = 1; k + 1 < values.size(); ++k) {
        if (values[k] > values[k - 1]) {
            std::size_t j = k;
            while (j + 1 < values.size() && values[j + 1] == values[k]) ++j;
            if (j + 1 < values.size() && values[j + 1] < values[k])
                maxima.push_back(k);
        }
    }
    return maxima;
}

}  // namespace vpair::analysis
