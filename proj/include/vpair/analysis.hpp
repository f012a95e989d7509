#ifndef VPAIR_ANALYSIS_HPP
#define VPAIR_ANALYSIS_HPP

#include "vpair/trajectory.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vpair::analysis {

// Photon counts over consecutive bins of width dt (units 1/a3); the
// trailing partial bin is discarded.
struct IntensityTrace {
    double dt = 0.0;
    std::vector<int> counts;
    double intensity(std::size_t bin) const { return counts[bin] / dt; }
    std::size_t size() const { return counts.size(); }
};

IntensityTrace bin_intensity(const EmissionRecord& record, double dt);

// Steady fluorescence rate of a single resonantly driven two-level atom
// (levels 1 and 3): the class-1 reference intensity.
double reference_intensity(const ModelParams& params);

// Per-bin classes 0 (dark), 1 (single), 2 (double) by thresholds on the
// bin intensity; segments shorter than min_bins are absorbed into the
// longer adjacent segment.
struct ClassifyConfig {
    double theta01 = 0.5;  // thresholds in units of the reference intensity
    double theta12 = 1.5;
    int min_bins = 1;
};

struct Segment {
    int cls;            // 0, 1 or 2
    std::size_t begin;  // first bin
    std::size_t end;    // one past last bin
    std::size_t length() const { return end - begin; }
};

struct PeriodSequence {
    double i1 = 0.0;
    double theta01 = 0.0;  // absolute intensities
    double theta12 = 0.0;
    std::vector<Segment> segments;
};

PeriodSequence classify_periods(const IntensityTrace& trace, double i1,
                                const ClassifyConfig& config = {});

// Per-bin class labels expanded from the segment list.
std::vector<int> bin_classes(const PeriodSequence& seq, std::size_t nbins);

// Mean period durations with standard errors. The first and last segments
// are truncated by the observation window and excluded; double jumps are
// adjacent {0,2} segments anywhere in the sequence. Means of absent
// classes are NaN.
struct DurationStats {
    double t0 = 0.0, t1 = 0.0, t2 = 0.0;
    double se0 = 0.0, se1 = 0.0, se2 = 0.0;
    long n0 = 0, n1 = 0, n2 = 0;
    long double_jumps = 0;
    std::vector<std::string> warnings;
};

DurationStats duration_stats(const PeriodSequence& seq, double dt);
// Pools interior segments of several sequences (independent trajectories
// at the same parameters); merge order is fixed by sequence index.
DurationStats duration_stats(const std::vector<PeriodSequence>& seqs,
                             double dt);

// Total photons per total time spent in class-2 bins; empty when the class
// is absent (the expected outcome at very small distance).
std::optional<double> period2_intensity(const PeriodSequence& seq,
                                        const IntensityTrace& trace);
std::optional<double> period2_intensity(
    const std::vector<PeriodSequence>& seqs,
    const std::vector<IntensityTrace>& traces);

// Deterministic replay of the record emitting normalized subspace
// populations at times k*dt. Throws the replay's corrupted-record errors.
struct SubspacePoint {
    double t;
    double p0, p1, p2;
};

std::vector<SubspacePoint> subspace_trace(const EmissionRecord& record,
                                          double dt);

// CSV writers used by the command line tools.
void write_intensity_csv(std::ostream& os, const IntensityTrace& trace,
                         const PeriodSequence& seq);
void write_subspace_csv(std::ostream& os,
                        const std::vector<SubspacePoint>& points,
                        const PeriodSequence& seq, double class_dt);

// Sample Pearson correlation; throws std::invalid_argument on size
// mismatch, fewer than two points, or zero variance.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// Indices of strict interior local maxima (plateaus report their first
// index).
std::vector<std::size_t> local_maxima(const std::vector<double>& values);

}  // namespace vpair::analysis

#endif
