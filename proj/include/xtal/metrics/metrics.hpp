// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xtal/agents/toolbox.hpp"
#include "xtal/agents/workflow.hpp"
#include "xtal/energy/calculator.hpp"
#include "xtal/energy/hull.hpp"
#include "xtal/energy/relax.hpp"
#include "xtal/io/database.hpp"
#include "xtal/matcher/matcher.hpp"

namespace xtal {

struct GenerationOptions {
    RelaxOptions relax;
    bool relax_candidates = true;
    MatchTolerances match;
    int threads = 1;
};

struct CandidateEvaluation {
    std::size_t index = 0;
    std::optional<CrystalStructure> relaxed;
    std::optional<double> energy_per_atom;
    std::optional<double> e_hull;
    bool structurally_valid = false;
    bool compositionally_valid = false;
    StabilityFlags flags;
    bool novel = false;
    bool unique = false;  // first of its matcher group among stable candidates
    bool sun = false;     // first of its group among stable and novel candidates
    std::string error;    // calculator failure; the candidate then counts as invalid

    nlohmann::json to_json() const;
};

struct GenerationReport {
    std::size_t n_candidates = 0;
    std::size_t n_stable = 0;
    std::size_t n_unique_stable = 0;
    std::size_t n_sun = 0;
    double structural_validity_rate = 0.0;
    double compositional_validity_rate = 0.0;
    double metastability_rate_0_1 = 0.0;
    double metastability_rate_0_03 = 0.0;
    double stability_rate = 0.0;
    double uniqueness_rate = 0.0;  // over the stable set; 0 when nothing is stable
    double novelty_rate = 0.0;
    double sun_rate = 0.0;
    std::vector<CandidateEvaluation> candidates;

    /// Counts and rates only (the golden-file form).
    nlohmann::json to_json() const;
    nlohmann::json candidates_json() const;
    std::string to_table() const;
};

/// Relaxes each candidate, then scores validity, hull stability, uniqueness
/// among stable candidates, novelty against the reference records and S.U.N.
/// Throws HullError when an element of any candidate has no elemental entry
/// in `hull`. A calculator failure marks that candidate invalid and unstable.
GenerationReport evaluate_generation(const std::vector<CrystalStructure>& candidates,
                                     const std::vector<StructureRecord>& reference,
                                     const std::vector<HullEntry>& hull, const Calculator& calculator,
                                     const GenerationOptions& options = {});

struct CspReport {
    int n_pairs = 0;
    int n_matched = 0;
    double match_rate = 0.0;
    std::optional<double> mean_rmse;  // only when something matched

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Missing predictions count as unmatched. Throws on a length mismatch.
CspReport evaluate_csp(const std::vector<std::optional<CrystalStructure>>& predictions,
                       const std::vector<CrystalStructure>& ground_truths, const MatchTolerances& tol = {});

struct AuditSample {
    TaskKind kind = TaskKind::CSP;
    int trial = 0;
    bool valid = false;
    std::optional<int> length;  // steps, when the workflow parsed
    std::string reason;         // why it is invalid

    nlohmann::json to_json() const;
};

struct AuditRow {
    TaskKind kind = TaskKind::CSP;
    int samples = 0;
    int valid = 0;
    double validity_rate = 0.0;
    std::optional<double> mean_length;  // over samples that parsed
};

struct AuditReport {
    bool with_intuition = false;
    std::vector<AuditRow> rows;  // one per task kind present, in enum order
    std::vector<AuditSample> samples;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Samples `trials` workflows per task. A sample is valid when the plan
/// parses with at most max_workflow_steps steps and every step yields a tool
/// plan that passes dry-run validation on the first try. Without intuition
/// the task's global and per-step intuition are cleared. Backend errors make
/// the sample invalid.
AuditReport audit_workflows(LanguageBackend& backend, const std::vector<TaskSpec>& tasks, bool with_intuition,
                            int trials, const Toolbox& toolbox, const DecodeParams& params = {});

} // namespace xtal
