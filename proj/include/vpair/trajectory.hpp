#ifndef VPAIR_TRAJECTORY_HPP
#define VPAIR_TRAJECTORY_HPP

#include "vpair/dynamics.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace vpair {

// SplitMix64 finalizer; used to scramble seeds and derive decorrelated
// per-trajectory substreams so ensembles are reproducible under any
// degree of parallelism.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

// Uniform draw strictly inside (0,1), identical across platforms for a
// given generator state (53 significant bits, offset by half a step).
double open_unit_interval(std::mt19937_64& rng);

// A photon detection resets the state through one of the two collective
// channels R+- = (S13- +- S23-)/sqrt(2), entered with rates a3 +- Re C3.
// The symmetric channel is superradiant, the antisymmetric subradiant.
struct ResetChannels {
    Mat r_plus;
    Mat r_minus;
    double weight_plus;   // a3 + Re C3
    double weight_minus;  // a3 - Re C3
    double a3;
    double re_c3;
};

ResetChannels reset_channels(const ModelParams& params);

// Generic weighted jump channel; the two-atom system uses labels '+'/'-',
// the single-atom reference a single channel.
struct JumpChannel {
    double weight;
    Mat op;
    char label;
};

std::vector<JumpChannel> to_jump_channels(const ResetChannels& channels);

struct Emission {
    double time;   // since trajectory start, units 1/a3
    char channel;  // '+' or '-'
};

struct EmissionRecord {
    ModelParams params;
    std::uint64_t seed = 0;
    std::string initial = "g";
    double duration = 0.0;
    std::vector<Emission> events;
};

// Inverts the no-photon probability: the unique t* with survival(t*) = u,
// bracketed by geometric doubling from t_scale and refined by a
// bisection-safeguarded secant iteration to 1e-9 relative tolerance in t.
// Throws std::runtime_error if the survival probability has not dropped to
// u by t_cap (an effectively dark state; cannot happen with both lasers on).
double sample_waiting_time(const ConditionalGenerator& gen,
                           const hilbert::StateVector& psi, double u,
                           double t_cap = 1e8, double t_scale = 1.0);

struct ResetOutcome {
    char channel;
    hilbert::StateVector state;  // normalized post-emission state
    double p_plus;
    double p_minus;
};

// Selects the reset channel with probabilities proportional to
// weight * ||R psi||^2 and returns the normalized post-state. Throws
// std::logic_error when both channel amplitudes vanish (an emission was
// sampled from a non-emitting state, i.e. a sampler bug).
ResetOutcome apply_reset(const ResetChannels& channels,
                         const hilbert::StateVector& psi, double u);

// Non-normalized reset map on density matrices, assembled from the
// individual-atom lowering operators and the cross terms weighted by
// Re C3. Equals the weighted two-channel decomposition identically; the
// trace times dt is the detection probability in dt.
Mat reset_density(const ResetChannels& channels, const Mat& rho);

// Single stochastic trajectory over any (generator, channels) pair.
// Consumes exactly one uniform per waiting attempt and one per reset, which
// fixes the replay contract.
std::vector<Emission> run_jump_trajectory(const ConditionalGenerator& gen,
                                          const std::vector<JumpChannel>& channels,
                                          Vec psi0, double duration,
                                          std::mt19937_64& rng,
                                          double t_scale = 1.0);

// Two-atom trajectory from a Dicke basis state label. Deterministic in
// (params, initial, duration, seed).
EmissionRecord run_trajectory(const ModelParams& params,
                              const std::string& initial, double duration,
                              std::uint64_t seed);

// n independent trajectories with substreams derived from (seed, index).
// The result is identical for any thread count. threads = 0 uses the
// hardware concurrency.
std::vector<EmissionRecord> run_ensemble(const ModelParams& params,
                                         const std::string& initial,
                                         double duration, int n,
                                         std::uint64_t seed, int threads = 0);

// Deterministic replay of a recorded trajectory: conditional propagation
// between recorded emissions, recorded channel applied at each. When
// verify is set, the uniform stream is regenerated from the record's seed
// and each recorded waiting time and channel is checked against it
// (mismatch beyond 1e-6 in survival probability: corrupted record).
class TrajectoryReplay {
  public:
    explicit TrajectoryReplay(const EmissionRecord& record, bool verify = true);

    // Normalized state at absolute time t; calls must be non-decreasing.
    Vec state_at(double t);
    const ConditionalGenerator& generator() const { return gen_; }

  private:
    void process_event(const Emission& event);

    EmissionRecord record_;
    ConditionalGenerator gen_;
    ResetChannels channels_;
    std::mt19937_64 rng_;
    bool verify_;
    std::size_t next_event_ = 0;
    double segment_start_ = 0.0;
    ConditionalEvolution evo_;
};

void save_record(const EmissionRecord& record, std::ostream& os);
void save_record(const EmissionRecord& record, const std::string& path);
EmissionRecord load_record(std::istream& is);
EmissionRecord load_record_file(const std::string& path);

}  // namespace vpair

#endif
