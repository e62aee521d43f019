#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paracalc/paraproducts.hpp"

namespace paracalc {

/// Recipe node types. Every node additionally carries a chain power p, meaning
/// (L^{-1}L)^p is applied on top of it.
///   noise           L^{-1} zeta
///   zeta1           L^{-1} zeta^(1)_e,  e a word of 1 or 2 letters, |e| <= 2 alpha
///   zeta2_word      L^{-1} zeta^(2)_e,  e a word of >= 2 letters
///   zeta2_sentence  L^{-1} zeta^(2)_e,  e a sentence of >= 2 one-letter words
///   resonant        Pi(tau, sigma), tau <= sigma in T_1
///   merge           R(1, tau, sigma), tau, sigma in T_1
///   vector_field    L^{-1} zeta_{j, tau}, tau in T_1
enum class LetterKind { noise, zeta1, zeta2_word, zeta2_sentence, resonant, merge, vector_field };

std::string to_string(LetterKind k);

struct Letter {
    LetterKind kind = LetterKind::noise;
    std::vector<int> children;  // alphabet indices
    int axis = -1;              // vector_field only
    int chain = 0;              // power of L^{-1}L on this node
    int level = 1;              // |tau| = level * alpha
    int n_tau = 0;              // chain count of the whole recipe
    std::string id;             // full recipe
    std::string node_id;        // recipe of the top node without its own chain power
    std::string skeleton_id;    // recipe with every chain power removed
    std::vector<int> chain_powers;  // per recipe node, preorder
};

struct Alphabet {
    double alpha = 0.45;
    int order = 3;
    int chain_cap = 0;
    int vector_fields = 1;
    std::vector<Letter> letters;        // level-major canonical order
    std::vector<std::string> excluded;  // recipes the chain cap removed

    int size() const { return int(letters.size()); }
    int count_level(int level) const;
    std::optional<int> find(const std::string& id) const;
    /// Index of the letter with the same recipe and one more chain power on top.
    std::optional<int> chained(int letter) const;
    /// Index of the letter one chain power below, if the top node is chained.
    std::optional<int> unchained(int letter) const;
    double homogeneity(int letter) const { return alpha * letters[std::size_t(letter)].level; }
};

/// Smallest letter set closed under the construction rules, truncated to n_tau <= chain_cap.
Alphabet generate_alphabet(double alpha, int order, int chain_cap, int vector_fields = 1);

struct Word {
    std::vector<int> letters;
    int level = 0;  // |a| = level * alpha

    int count() const { return int(letters.size()); }
    bool empty() const { return letters.empty(); }
};

/// All words with |a| <= order * alpha, the empty word first.
std::vector<Word> generate_words(const Alphabet& A, int order);

struct BetaTable {
    std::vector<double> beta;  // per word
    std::vector<std::pair<int, int>> classes;  // (letter count, level), ascending beta
    double lo = 0.4, hi = 0.45;
    double margin = 0.0;
};

/// beta_a in (2/5, alpha): increasing in letter count, then decreasing in level.
BetaTable assign_betas(const std::vector<Word>& words, double alpha);

/// Words, exponents and the extension table a -> a sigma.
struct SystemLayout {
    Alphabet alphabet;
    int order = 3;
    std::vector<Word> words;
    BetaTable betas;
    std::vector<std::vector<std::pair<int, int>>> extensions;  // per word: (letter, index of a.letter)

    int word_count() const { return int(words.size()); }
    std::optional<int> word_index(const std::vector<int>& letters) const;
    /// Index of the one-letter word (tau).
    int letter_word(int letter) const;
    double homogeneity(int word) const { return alphabet.alpha * words[std::size_t(word)].level; }
    /// Regularity exponent n alpha + beta_b - |b| of the remainder at word b.
    double remainder_exponent(int word) const;
    std::string word_label(int word) const;

private:
    std::map<std::vector<int>, int> index_;
    friend SystemLayout make_layout(const Alphabet& A, int order);
};

SystemLayout make_layout(const Alphabet& A, int order);

/// Remainders u_a^sharp indexed like layout.words; an empty field means missing.
struct ParacontrolledSystem {
    std::vector<SpaceTimeField> remainders;
};

/// [[a]] = product of the letter norms.
double word_weight(const SystemLayout& L, int word, const std::vector<double>& letter_norms);

/// Sum over words of ||u_b^sharp||_{n alpha + beta_b - |b|} [[b]].
double system_norm(const SystemLayout& L, const ParacontrolledSystem& s, const std::vector<double>& letter_norms);
/// Norm of the difference of two systems.
double system_distance(const SystemLayout& L, const ParacontrolledSystem& a, const ParacontrolledSystem& b,
                       const std::vector<double>& letter_norms);

/// Coefficients u_a = sum_sigma P~_{u_{a sigma}} sigma + u_a^sharp, longest words first.
std::vector<SpaceTimeField> reconstruct(const SystemLayout& L, const ParacontrolledSystem& s,
                                        const std::vector<SpaceTimeField>& letter_fields, const OperatorL& op);

struct CoefficientBoundReport {
    double system_norm = 0.0;
    std::vector<double> coefficient_norms;  // ||u_a||_{beta_a}
    double weighted_sum = 0.0;              // sum_a ||u_a||_{beta_a} [[a]]
    double constant_sum = 0.0;              // weighted_sum / system norm
    double constant_max = 0.0;              // max_a ||u_a||_{beta_a} / system norm
};

CoefficientBoundReport coefficient_bound_check(const SystemLayout& L, const ParacontrolledSystem& s,
                                               const std::vector<SpaceTimeField>& letter_fields,
                                               const std::vector<double>& letter_norms, const OperatorL& op);

/// Smooth random remainders of unit size, one per word.
ParacontrolledSystem random_system(const SystemLayout& L, const SpaceGrid& g, int steps, double dt,
                                   std::uint64_t seed);

std::string alphabet_json(const SystemLayout& L);

}  // namespace paracalc
