#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "paracalc/word_algebra.hpp"

namespace paracalc {

/// Mollified noise: unit-variance spectral coefficients under the roll-off exp(-(mol |k|)^2).
struct NoiseSpec {
    std::uint64_t seed = 1;
    double mol = 0.125;          // roll-off scale; 1/mol must not exceed N/2
    double amplitude = 1.0;
    bool time_dependent = false;  // space-time mode: a few temporal Fourier modes
    int time_modes = 2;
};

void validate(const NoiseSpec& spec, const SpaceGrid& g);

/// Space-only sample, the t-independent part of the noise.
Field sample_noise_field(const NoiseSpec& spec, const SpaceGrid& g, std::uint64_t stream = 0);
SpaceTimeField sample_noise(const NoiseSpec& spec, const SpaceGrid& g, int steps, double dt);

/// Stochastic term families.
enum class TermKind { zeta1, zeta2_word, zeta2_sentence, zeta_v };

std::string to_string(TermKind k);

/// A stochastic term zeta_e indexed by the letters of e.
struct TermKey {
    TermKind kind = TermKind::zeta1;
    std::vector<int> letters;
    int axis = -1;

    bool operator<(const TermKey& o) const
    {
        return std::tie(kind, letters, axis) < std::tie(o.kind, o.letters, o.axis);
    }
    bool operator==(const TermKey& o) const { return kind == o.kind && letters == o.letters && axis == o.axis; }
};

std::string term_id(const Alphabet& A, const TermKey& key);

/// Regularity measured on the final slice against a nominal exponent; blocks under
/// 1e-10 of the largest one count as roundoff.
struct ExponentCheck {
    double nominal = 0.0;
    double measured = 0.0;
    double r2 = 0.0;
    bool smooth = false;  // too few blocks above the floor: smoother than any finite slope
    bool ok(double tolerance = 0.2) const { return smooth || measured >= nominal - tolerance; }
};

ExponentCheck measure_exponent(const SpaceTimeField& f, double nominal);

struct ReferenceTerm {
    TermKey key;
    std::string id;
    SpaceTimeField field;
    ExponentCheck exponent;
    double norm = 0.0;
};

/// E(x) = x zeta - P_x zeta.
SpaceTimeField zeta_defect(const SpaceTimeField& x, const SpaceTimeField& noise);
/// G(x, y) = x y - P_x y.
SpaceTimeField product_defect(const SpaceTimeField& x, const SpaceTimeField& y);
/// Lp = c0 Laplacian = -L.
SpaceTimeField apply_lp(const SpaceTimeField& f, const OperatorL& op);

struct ReferenceData {
    SystemLayout layout;
    NoiseSpec noise_spec;
    OperatorL op;
    SpaceTimeField noise;
    std::vector<SpaceTimeField> letters;  // per alphabet letter
    std::vector<ExponentCheck> letter_exponents;
    std::vector<double> letter_norms;     // ||tau||_{|tau|}
    std::vector<ReferenceTerm> terms;     // canonical order

    const SpaceGrid& grid() const { return noise.grid(); }
    int steps() const { return noise.steps(); }
    double dt() const { return noise.dt(); }
    /// Null if the term was never built.
    const ReferenceTerm* find(const TermKey& key) const;
    const SpaceTimeField& term(const TermKey& key) const;

private:
    std::map<TermKey, int> index_;
    friend ReferenceData build_reference_data(const SystemLayout&, const NoiseSpec&, const SpaceGrid&, int, double,
                                              const OperatorL&);
};

/// Every stochastic term required by the canonical right-hand side over the alphabet's letters,
/// including those whose letter the chain cap removed.
std::vector<TermKey> required_terms(const SystemLayout& L);

/// Evaluates a term from the letters it is indexed by.
SpaceTimeField evaluate_term(const TermKey& key, const std::vector<SpaceTimeField>& letters,
                             const SpaceTimeField& noise, const OperatorL& op);

/// Evaluates one letter from its children and its source term.
SpaceTimeField evaluate_letter(const Alphabet& A, int letter, const std::vector<std::optional<SpaceTimeField>>& done,
                               const SpaceTimeField& noise, const OperatorL& op);

/// Letters and terms in dependency order, independent nodes in parallel.
ReferenceData build_reference_data(const SystemLayout& L, const NoiseSpec& spec, const SpaceGrid& g, int steps,
                                   double dt, const OperatorL& op);

// ---- growth of letter norms in the chain count ----

struct NormRecord {
    std::string id;
    std::string skeleton_id;
    int n_tau = 0;
    double norm = 0.0;
};

struct ClassFit {
    std::string skeleton_id;
    int points = 0;
    double k_fit = 0.0, c_fit = 1.0, r2 = 1.0;
    double k_envelope = 0.0;  // smallest k with norm <= k C^n on every point
    bool within_tolerance = true;  // every point <= k_fit C_fit^n (1 + 0.1)
};

struct AssumptionAReport {
    std::vector<ClassFit> classes;  // skeletons with >= 2 distinct chain counts
    ClassFit headline;              // the chain class of the noise letter
    bool degenerate = false;        // all norms zero
    double k_fit() const { return headline.k_fit; }
    double c_fit() const { return headline.c_fit; }
    double r2() const { return headline.r2; }
};

std::vector<NormRecord> norm_records(const ReferenceData& refs);
AssumptionAReport verify_assumption_a(const std::vector<NormRecord>& records, int chain_cap);
std::string assumption_a_json(const AssumptionAReport& r);

// ---- reference store ----

/// Writes letters/<i>.pcf, terms/<i>.pcf and manifest.json under dir.
void write_reference_store(const ReferenceData& refs, const std::string& dir);
/// Norm records and chain cap from a store manifest.
std::pair<std::vector<NormRecord>, int> read_store_norms(const std::string& dir);
std::string reference_manifest_json(const ReferenceData& refs);

}  // namespace paracalc
