#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "role/common.hpp"
#include "role/nets/seq2seq.hpp"
#include "role/role_learner.hpp"

namespace role::analysis {

/// The 16 abstract role labels the symbolic algorithm uses.
const std::vector<int>& symbolic_role_inventory();

/// Hand-written role assignment for SCAN commands. Throws ParseError on an
/// ungrammatical command.
std::vector<int> scan_role_algorithm(std::span<const std::string> tokens);

/// Bijection from abstract labels to learned role indices, and how often the
/// relabeled algorithm reproduces the learned roles for a whole sequence.
struct RoleMatch {
  std::map<int, std::size_t> label_to_role;
  std::size_t matched = 0;
  std::size_t total = 0;
  double match_rate = 0.0;
  std::size_t distinct_learned_roles = 0;
};

/// Greedy bijection on label/role co-occurrence counts (largest first),
/// leftover labels paired with the lowest unused role indices, then an exact
/// whole-sequence match count. Throws ConfigError if n_roles is smaller than
/// the label inventory.
RoleMatch fit_role_labels(const std::vector<std::vector<int>>& symbolic,
                          const std::vector<std::vector<std::size_t>>& learned, std::size_t n_roles);

/// Runs the algorithm and the model's snapped roles over `commands`.
RoleMatch algorithm_match_rate(const learner::RoleModel& model, const std::vector<std::vector<std::string>>& commands);

// ---------------------------------------------------------------------------
// Constituent surgery

/// Word classes whose members replace each other anywhere in the grammar.
/// `and` and `after` are never swapped.
const std::vector<std::vector<std::string>>& scan_equivalence_classes();
bool equivalent_words(const std::string& a, const std::string& b);

struct Swap {
  std::size_t position = 0;
  std::string old_word;
  std::string new_word;
};

struct SurgerySpec {
  std::vector<std::string> base;
  std::vector<Swap> swaps;
  /// The command after every swap. Throws ConfigError on a swap outside an
  /// equivalence class or one whose old word is not at its position, and
  /// ParseError if the result is ungrammatical.
  std::vector<std::string> result() const;
};

/// Learned role index for every token of a command.
using RoleLabeler = std::function<std::vector<std::size_t>(std::span<const std::string>)>;

/// Roles from the symbolic algorithm, mapped to learned roles. Throws
/// ConfigError for a label missing from the map.
RoleLabeler algorithm_labeler(std::map<int, std::size_t> label_to_role);

/// Roles from the model's own snapped attention. The model must outlive the
/// labeler.
RoleLabeler learned_labeler(const learner::RoleModel& model);

/// e' = e - sum W(f_old (x) r_old) + sum W(f_new (x) r_new) over positions
/// whose word or role changes; W is the linear part of the ROLE output map
/// and roles come from `labeler` applied to the command before and after.
std::vector<double> constituent_surgery(std::span<const double> e, const learner::RoleModel& model,
                                        const SurgerySpec& spec, const RoleLabeler& labeler);

/// A random spec with `n_swaps` swaps at distinct positions of a base drawn
/// from `pool` (only bases with enough swappable words are eligible). Throws
/// ConfigError if no base qualifies.
SurgerySpec sample_surgery(const std::vector<std::vector<std::string>>& pool, std::size_t n_swaps, Rng& rng);

struct SurgeryPoint {
  std::size_t swaps = 0;
  std::size_t trials = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

/// Accuracy of decoding surgically edited target encodings against the
/// interpreter's output for the edited command, for 1..max_swaps swaps.
std::vector<SurgeryPoint> surgery_curve(const nets::Seq2Seq& target, const learner::RoleModel& model,
                                        const RoleLabeler& labeler,
                                        const std::vector<std::vector<std::string>>& pool, std::size_t max_swaps,
                                        std::size_t trials, std::uint64_t seed, std::size_t workers = 1);

/// One step of a successive-surgery chain.
struct ChainStep {
  std::vector<std::string> command;
  std::vector<std::string> expected;
  std::vector<std::string> decoded;
  bool correct = false;
};

/// Applies the replacements one after another to the running encoding,
/// starting from the target encoding of `base`. Each replacement swaps the
/// first occurrence of its old word. The first step reports the base itself.
std::vector<ChainStep> surgery_chain(const nets::Seq2Seq& target, const learner::RoleModel& model,
                                     const RoleLabeler& labeler,
                                     const std::vector<std::string>& base,
                                     const std::vector<std::pair<std::string, std::string>>& replacements);

}  // namespace role::analysis
