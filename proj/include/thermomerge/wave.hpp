#pragma once

// Lexical items as sinusoids and Merge as cross-frequency phase
// synchronisation through the Ry2 thermodynamic sum, with recovery of the
// merged phases from beta sweeps and from products of component waves.
//
// Waves are A sin(2 pi nu t + omega) with exact rational nu. Phases are plain
// reals inside the semiring; nothing is reduced mod 2 pi there.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "thermomerge/rational.hpp"
#include "thermomerge/semiring.hpp"
#include "thermomerge/syntax.hpp"
#include "thermomerge/workspace.hpp"

namespace thermomerge {

struct Wave {
  double amplitude = 1.0;
  Rational frequency{1};
  double phase = 0.0;

  // amplitude > 0 and frequency > 0.
  void validate() const;
  double value(double t) const;
};

struct WavePacket {
  std::vector<Wave> waves;

  double value(double t) const;
};

using LexWaves = std::map<std::string, Wave>;

// {"items":[{"id":"a","label":"...","wave":{"A":1,"nu":"2/3","omega":0.3}}, ...]}
LexWaves lexicon_waves_from_json_text(std::string_view text);
// [{"A":1,"nu":"2/3","omega":0.3}, ...]
std::string packet_to_json(const WavePacket& p);
WavePacket packet_from_json(std::string_view text);

// Coprime (n12, n21) with n12 nu1 == n21 nu2.
std::pair<std::int64_t, std::int64_t> freq_multipliers(const Rational& nu1, const Rational& nu2);

struct SyncPairResult {
  double omega;  // (n12 w1) (+) (n21 w2)
  WavePacket packet;
  std::int64_t n12;
  std::int64_t n21;
};

SyncPairResult sync_pair(const Wave& w1, const Wave& w2, const ThermoParams& p);

struct SyncNode {
  Rational ref_frequency;
  double phase = 0.0;
  double beta = 0.0;  // beta used at this vertex; 0 at leaves
  std::int64_t m1 = 1;  // multiplier of children[0]
  std::int64_t m2 = 1;  // multiplier of children[1]
  std::vector<SyncNode> children;  // empty or two, canonical child order
};

// Per-vertex inverse temperatures; vertices not listed use the global beta.
using BetaAssignment = std::map<NodeId, double>;

struct SyncTreeResult {
  SyncNode root;
  WavePacket packet;  // every leaf wave with the root phase
};

SyncTreeResult sync_tree(const SynTree& t, const LexWaves& waves, const ThermoParams& p,
                         const BetaAssignment& betas = {});

const SyncNode& sync_node_at(const SyncNode& root, const NodeId& v);

struct ExtractConfig {
  std::vector<double> betas = geometric_sweep(1e-3, 1e-1, 12);
  double tol = 1e-3;
  // When the fit fails the whole sweep is multiplied by rescale_factor and
  // retried, at most max_rescales times.
  int max_rescales = 6;
  double rescale_factor = 0.1;
};

struct PairExtraction {
  double lo;         // the smaller merged phase
  double hi;         // the larger merged phase
  double midpoint;   // limit of omega(beta) + log 2 / beta as beta -> 0
  double residual;   // max abs residual of the fitted model
};

// Recovers the two (multiplier-scaled) phases merged by a single Ry2 Merge
// from observations omega(beta) on the configured sweep.
PairExtraction extract_pair(const std::function<double(double)>& omega_of_beta,
                            const ExtractConfig& cfg = {});

// Root phase of the composite as a function of the per-vertex betas.
using MultiBetaObservation = std::function<double(const BetaAssignment&)>;

struct MultiBetaResult {
  // omega_{T_v} at the base betas for every vertex; leaves hold leaf phases.
  std::map<NodeId, double> phases;
  // Vertices whose children are both leaves: the two recovered values are
  // symmetric under the Merge and cannot be told apart by any beta sweep.
  // `alternative` holds the exchanged assignment (child 0, child 1).
  std::vector<NodeId> ambiguous;
  std::map<NodeId, std::pair<double, double>> alternative;
};

// Peels vertices from the root down, sweeping each vertex's own beta while
// the others stay at `base`. `base` needs a distinct beta for every internal
// vertex.
MultiBetaResult multibeta_extract(const SynTree& t, const std::map<std::string, Rational>& freqs,
                                  const BetaAssignment& base, const MultiBetaObservation& observe,
                                  const ExtractConfig& cfg = {});

// Sample times t_i = i * duration / samples.
struct TimeGrid {
  double duration = 4.0;
  std::size_t samples = 4096;

  double point(std::size_t i) const;
};

// One sinusoid per component: a leaf keeps its wave; an internal vertex uses
// the mean leaf amplitude, its reference frequency and its synchronised phase.
Wave representative_wave(const SynTree& t, const LexWaves& waves, const ThermoParams& p,
                         const BetaAssignment& betas = {});
std::vector<Wave> workspace_representatives(const Workspace& f, const LexWaves& waves,
                                            const ThermoParams& p);

// Pointwise product of the component sinusoids; all ones for no components.
std::vector<double> workspace_wave(const std::vector<Wave>& components, const TimeGrid& grid);

struct PhaseRecoveryConfig {
  // Every phase but the last is reported in (center - pi/2, center + pi/2];
  // the last absorbs the remaining sign. Flipping an even number of factors
  // by pi leaves a product unchanged, so some such convention is needed.
  double window_center = 0.0;
  double max_condition = 1e8;
};

// Phases of up to three sinusoidal factors with known distinct frequencies
// from samples of their product.
std::vector<double> fft_phase_recovery(const std::vector<double>& samples, const TimeGrid& grid,
                                       const std::vector<Rational>& freqs,
                                       const PhaseRecoveryConfig& cfg = {});

struct WaveMergeResult {
  bool merged = false;
  Workspace workspace;
  std::vector<double> recovered_phases;  // per component of the input
  double merged_phase = 0.0;
  std::vector<Wave> representatives;     // per component of the output
  std::vector<double> signal;
};

// Recovers the component phases from `signal`, merges t1 and t2 in the wave
// picture and re-synthesises the product for the new workspace. Only External
// Merge of two whole components is supported; when {t1, t2} is not a Pi2
// channel of f the signal is returned unchanged.
WaveMergeResult wave_merge_operator(const Workspace& f, const SynTree& t1, const SynTree& t2,
                                    const ThermoParams& p, const LexWaves& waves,
                                    const std::vector<double>& signal, const TimeGrid& grid,
                                    const PhaseRecoveryConfig& cfg = {});

// CSV "t,value".
std::string signal_to_csv(const std::vector<double>& signal, const TimeGrid& grid);

}  // namespace thermomerge
