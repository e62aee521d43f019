#include "paracalc/word_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include <json.hpp>

#include "paracalc/littlewood_paley.hpp"
#include "paracalc/parallel.hpp"
#include "paracalc/rng.hpp"

namespace paracalc {

std::string to_string(LetterKind k)
{
    switch (k) {
    case LetterKind::noise: return "noise";
    case LetterKind::zeta1: return "zeta1";
    case LetterKind::zeta2_word: return "zeta2_word";
    case LetterKind::zeta2_sentence: return "zeta2_sentence";
    case LetterKind::resonant: return "resonant";
    case LetterKind::merge: return "merge";
    case LetterKind::vector_field: return "vector_field";
    }
    return "?";
}

namespace {

std::string chained_id(const std::string& node, int p)
{
    if (p == 0) return node;
    return (p == 1 ? "IL(" : "IL^" + std::to_string(p) + "(") + node + ")";
}

std::string join(const std::vector<std::string>& parts, const char* sep)
{
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
    return s;
}

/// Recipe text of a node from the texts of its children.
std::string node_text(LetterKind kind, const std::vector<std::string>& kids, int axis)
{
    switch (kind) {
    case LetterKind::noise: return "Z";
    case LetterKind::zeta1: return "I1[" + join(kids, ",") + "]";
    case LetterKind::zeta2_word: return "I2[" + join(kids, ",") + "]";
    case LetterKind::zeta2_sentence: return "I2[" + join(kids, "|") + "]";
    case LetterKind::resonant: return "Pi(" + join(kids, ",") + ")";
    case LetterKind::merge: return "R(1," + join(kids, ",") + ")";
    case LetterKind::vector_field: return "IV" + std::to_string(axis) + "[" + join(kids, ",") + "]";
    }
    return "?";
}

class Builder {
public:
    Builder(Alphabet& A) : A_(A) {}

    void add(LetterKind kind, const std::vector<int>& kids, int axis, int level)
    {
        std::vector<std::string> ids, skel;
        int n = 0;
        for (int c : kids) {
            const Letter& l = A_.letters[std::size_t(c)];
            ids.push_back(l.id);
            skel.push_back(l.skeleton_id);
            n += l.n_tau;
        }
        const std::string node = node_text(kind, ids, axis);
        if (n > A_.chain_cap) {
            A_.excluded.push_back(node);
            return;
        }
        for (int p = 0; p <= A_.chain_cap - n; ++p) {
            Letter l;
            l.kind = kind;
            l.children = kids;
            l.axis = axis;
            l.chain = p;
            l.level = level;
            l.n_tau = n + p;
            l.node_id = node;
            l.id = chained_id(node, p);
            l.skeleton_id = node_text(kind, skel, axis);
            l.chain_powers.push_back(p);
            for (int c : kids) {
                const auto& cp = A_.letters[std::size_t(c)].chain_powers;
                l.chain_powers.insert(l.chain_powers.end(), cp.begin(), cp.end());
            }
            A_.letters.push_back(std::move(l));
        }
        A_.excluded.push_back(chained_id(node, A_.chain_cap - n + 1));
    }

private:
    Alphabet& A_;
};

/// Ordered tuples of letters from pool with the given total level and length in [min_len, max_len].
void tuples(const std::vector<int>& pool, const Alphabet& A, int level, int min_len, int max_len,
            std::vector<int>& cur, int cur_level, std::vector<std::vector<int>>& out)
{
    if (cur_level == level && int(cur.size()) >= min_len) out.push_back(cur);
    if (int(cur.size()) == max_len) return;
    for (int l : pool) {
        const int lv = A.letters[std::size_t(l)].level;
        if (cur_level + lv > level) continue;
        cur.push_back(l);
        tuples(pool, A, level, min_len, max_len, cur, cur_level + lv, out);
        cur.pop_back();
    }
}

std::vector<std::vector<int>> tuples_of(const std::vector<int>& pool, const Alphabet& A, int level, int min_len,
                                        int max_len)
{
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    tuples(pool, A, level, min_len, max_len, cur, 0, out);
    // canonical: by length, then lexicographic
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

}  // namespace

int Alphabet::count_level(int level) const
{
    return int(std::count_if(letters.begin(), letters.end(), [level](const Letter& l) { return l.level == level; }));
}

std::optional<int> Alphabet::find(const std::string& id) const
{
    for (int i = 0; i < size(); ++i)
        if (letters[std::size_t(i)].id == id) return i;
    return std::nullopt;
}

std::optional<int> Alphabet::chained(int letter) const
{
    const Letter& l = letters[std::size_t(letter)];
    return find(chained_id(l.node_id, l.chain + 1));
}

std::optional<int> Alphabet::unchained(int letter) const
{
    const Letter& l = letters[std::size_t(letter)];
    if (l.chain == 0) return std::nullopt;
    return find(chained_id(l.node_id, l.chain - 1));
}

Alphabet generate_alphabet(double alpha, int order, int chain_cap, int vector_fields)
{
    require(chain_cap >= 0, ErrorKind::domain, "alphabet: chain cap must be >= 0");
    require(alpha > 0.4 && alpha < 0.5, ErrorKind::domain, "alphabet: alpha must lie in (2/5, 1/2)");
    require(order >= 1 && order <= 3, ErrorKind::domain, "alphabet: order must be 1, 2 or 3");
    require(vector_fields >= 0 && vector_fields <= 2, ErrorKind::domain, "alphabet: vector fields must be 0, 1 or 2");
    Alphabet A;
    A.alpha = alpha;
    A.order = order;
    A.chain_cap = chain_cap;
    A.vector_fields = vector_fields;
    Builder b(A);
    b.add(LetterKind::noise, {}, -1, 1);
    for (int level = 2; level <= order; ++level) {
        std::vector<int> lower, first;
        for (int i = 0; i < A.size(); ++i) {
            lower.push_back(i);
            if (A.letters[std::size_t(i)].level == 1) first.push_back(i);
        }
        if (level - 1 <= 2)
            for (const auto& e : tuples_of(lower, A, level - 1, 1, 2)) b.add(LetterKind::zeta1, e, -1, level);
        for (const auto& e : tuples_of(lower, A, level, 2, level)) b.add(LetterKind::zeta2_word, e, -1, level);
        for (const auto& e : tuples_of(lower, A, level, 2, level)) b.add(LetterKind::zeta2_sentence, e, -1, level);
        if (level == 2) {
            for (std::size_t i = 0; i < first.size(); ++i)
                for (std::size_t j = i; j < first.size(); ++j)
                    b.add(LetterKind::resonant, {first[i], first[j]}, -1, 2);
            for (int x : first)
                for (int y : first) b.add(LetterKind::merge, {x, y}, -1, 2);
        }
        if (level == 3)
            for (int x : first)
                for (int j = 0; j < vector_fields; ++j) b.add(LetterKind::vector_field, {x}, j, 3);
    }
    return A;
}

std::vector<Word> generate_words(const Alphabet& A, int order)
{
    require(order >= 1 && order <= 3, ErrorKind::domain, "words: order must be 1, 2 or 3");
    std::vector<Word> words{Word{}};
    std::size_t begin = 0;
    while (begin < words.size()) {
        const std::size_t end = words.size();
        for (std::size_t w = begin; w < end; ++w)
            for (int l = 0; l < A.size(); ++l) {
                const int lv = A.letters[std::size_t(l)].level;
                if (words[w].level + lv > order) continue;
                Word x = words[w];
                x.letters.push_back(l);
                x.level += lv;
                words.push_back(std::move(x));
            }
        begin = end;
    }
    return words;
}

BetaTable assign_betas(const std::vector<Word>& words, double alpha)
{
    require(alpha > 0.4 && alpha < 0.5, ErrorKind::domain, "beta table: alpha must lie in (2/5, 1/2)");
    BetaTable t;
    t.hi = alpha;
    for (const auto& w : words) t.classes.emplace_back(w.count(), w.level);
    std::sort(t.classes.begin(), t.classes.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second > b.second;
    });
    t.classes.erase(std::unique(t.classes.begin(), t.classes.end()), t.classes.end());
    const double c = double(t.classes.size());
    t.margin = (alpha - t.lo) / (2.0 * c);
    const double a = t.lo + t.margin, b = alpha - t.margin;
    auto value = [&](std::size_t i) { return t.classes.size() == 1 ? 0.5 * (a + b) : a + (b - a) * double(i) / (c - 1); };
    for (const auto& w : words) {
        const auto it = std::find(t.classes.begin(), t.classes.end(), std::make_pair(w.count(), w.level));
        t.beta.push_back(value(std::size_t(it - t.classes.begin())));
    }
    return t;
}

std::optional<int> SystemLayout::word_index(const std::vector<int>& letters) const
{
    auto it = index_.find(letters);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int SystemLayout::letter_word(int letter) const
{
    auto w = word_index({letter});
    require(bool(w), ErrorKind::internal, "layout: letter without a one-letter word");
    return *w;
}

double SystemLayout::remainder_exponent(int word) const
{
    return alphabet.alpha * order + betas.beta[std::size_t(word)] - homogeneity(word);
}

std::string SystemLayout::word_label(int word) const
{
    std::vector<std::string> parts;
    for (int l : words[std::size_t(word)].letters) parts.push_back(alphabet.letters[std::size_t(l)].id);
    return "(" + join(parts, ", ") + ")";
}

SystemLayout make_layout(const Alphabet& A, int order)
{
    require(order <= A.order, ErrorKind::configuration, "layout: order exceeds the alphabet order");
    SystemLayout L;
    L.alphabet = A;
    L.order = order;
    L.words = generate_words(A, order);
    L.betas = assign_betas(L.words, A.alpha);
    for (int w = 0; w < L.word_count(); ++w) L.index_[L.words[std::size_t(w)].letters] = w;
    L.extensions.resize(L.words.size());
    for (int w = 0; w < L.word_count(); ++w)
        for (int l = 0; l < A.size(); ++l) {
            auto x = L.words[std::size_t(w)].letters;
            x.push_back(l);
            if (auto i = L.word_index(x)) L.extensions[std::size_t(w)].emplace_back(l, *i);
        }
    return L;
}

double word_weight(const SystemLayout& L, int word, const std::vector<double>& letter_norms)
{
    double w = 1.0;
    for (int l : L.words[std::size_t(word)].letters) w *= letter_norms[std::size_t(l)];
    return w;
}

namespace {

void check_complete(const SystemLayout& L, const ParacontrolledSystem& s)
{
    require(int(s.remainders.size()) == L.word_count(), ErrorKind::incomplete,
            "paracontrolled system: expected " + std::to_string(L.word_count()) + " remainders");
    for (int w = 0; w < L.word_count(); ++w)
        require(s.remainders[std::size_t(w)].slice_count() > 0, ErrorKind::incomplete,
                "paracontrolled system: missing remainder for word " + L.word_label(w));
}

double weighted_sum(const SystemLayout& L, const std::vector<double>& letter_norms,
                    const std::function<double(int)>& norm_of)
{
    std::vector<double> terms(L.words.size());
    parallel_for(terms.size(), [&](std::size_t w) {
        terms[w] = norm_of(int(w)) * word_weight(L, int(w), letter_norms);
    });
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

}  // namespace

double system_norm(const SystemLayout& L, const ParacontrolledSystem& s, const std::vector<double>& letter_norms)
{
    check_complete(L, s);
    return weighted_sum(L, letter_norms, [&](int w) {
        return parabolic_norm(s.remainders[std::size_t(w)], L.remainder_exponent(w));
    });
}

double system_distance(const SystemLayout& L, const ParacontrolledSystem& a, const ParacontrolledSystem& b,
                       const std::vector<double>& letter_norms)
{
    check_complete(L, a);
    check_complete(L, b);
    return weighted_sum(L, letter_norms, [&](int w) {
        return parabolic_norm(a.remainders[std::size_t(w)] - b.remainders[std::size_t(w)], L.remainder_exponent(w));
    });
}

std::vector<SpaceTimeField> reconstruct(const SystemLayout& L, const ParacontrolledSystem& s,
                                        const std::vector<SpaceTimeField>& letter_fields, const OperatorL& op)
{
    check_complete(L, s);
    require(int(letter_fields.size()) == L.alphabet.size(), ErrorKind::incomplete,
            "reconstruct: one reference field per letter is required");
    std::vector<SpaceTimeField> u(L.words.size());
    int top = 0;
    for (const auto& w : L.words) top = std::max(top, w.count());
    for (int len = top; len >= 0; --len) {
        std::vector<std::size_t> group;
        for (std::size_t w = 0; w < L.words.size(); ++w)
            if (L.words[w].count() == len) group.push_back(w);
        parallel_for(group.size(), [&](std::size_t i) {
            const std::size_t w = group[i];
            SpaceTimeField acc = s.remainders[w];
            for (const auto& [letter, ext] : L.extensions[w])
                acc += para_tilde(u[std::size_t(ext)], letter_fields[std::size_t(letter)], op);
            u[w] = std::move(acc);
        });
    }
    return u;
}

CoefficientBoundReport coefficient_bound_check(const SystemLayout& L, const ParacontrolledSystem& s,
                                               const std::vector<SpaceTimeField>& letter_fields,
                                               const std::vector<double>& letter_norms, const OperatorL& op)
{
    CoefficientBoundReport r;
    r.system_norm = system_norm(L, s, letter_norms);
    const auto u = reconstruct(L, s, letter_fields, op);
    r.coefficient_norms.resize(u.size());
    parallel_for(u.size(), [&](std::size_t w) {
        r.coefficient_norms[w] = parabolic_norm(u[w], L.betas.beta[w]);
    });
    double mx = 0.0;
    for (int w = 0; w < L.word_count(); ++w) {
        r.weighted_sum += r.coefficient_norms[std::size_t(w)] * word_weight(L, w, letter_norms);
        mx = std::max(mx, r.coefficient_norms[std::size_t(w)]);
    }
    if (r.system_norm > 0.0) {
        r.constant_sum = r.weighted_sum / r.system_norm;
        r.constant_max = mx / r.system_norm;
    }
    return r;
}

ParacontrolledSystem random_system(const SystemLayout& L, const SpaceGrid& g, int steps, double dt,
                                   std::uint64_t seed)
{
    ParacontrolledSystem s;
    s.remainders.resize(L.words.size());
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t w = 0; w < L.words.size(); ++w) {
        std::vector<Field> slices;
        double c[4][3];
        for (int k = 0; k < 4; ++k)
            for (int q = 0; q < 3; ++q) c[k][q] = rng::normal(seed, 1000 + w, std::uint64_t(3 * k + q));
        for (int m = 0; m <= steps; ++m) {
            const double t = m * dt;
            slices.push_back(Field::from_function(g, [&](double x, double y) {
                double v = c[0][0] + t * c[0][1];
                for (int k = 1; k < 4; ++k) {
                    const double ph = two_pi * (k * x + (g.dim == 2 ? (k % 2) * y : 0.0)) + c[k][2];
                    v += (c[k][0] + t * c[k][1]) * std::cos(ph) / double(k * k);
                }
                return v;
            }));
        }
        s.remainders[w] = SpaceTimeField(std::move(slices), dt);
    }
    return s;
}

std::string alphabet_json(const SystemLayout& L)
{
    using nlohmann::json;
    const Alphabet& A = L.alphabet;
    json j;
    j["alpha"] = A.alpha;
    j["order"] = L.order;
    j["chain_cap"] = A.chain_cap;
    j["vector_fields"] = A.vector_fields;
    j["level_counts"] = {A.count_level(1), A.count_level(2), A.count_level(3)};
    json letters = json::array();
    for (int i = 0; i < A.size(); ++i) {
        const Letter& l = A.letters[std::size_t(i)];
        letters.push_back({{"index", i},
                           {"id", l.id},
                           {"skeleton_id", l.skeleton_id},
                           {"kind", to_string(l.kind)},
                           {"children", l.children},
                           {"level", l.level},
                           {"homogeneity", A.homogeneity(i)},
                           {"n_tau", l.n_tau},
                           {"chain_powers", l.chain_powers}});
    }
    j["letters"] = letters;
    j["excluded_by_chain_cap"] = A.excluded;
    json words = json::array();
    for (int w = 0; w < L.word_count(); ++w) {
        const Word& x = L.words[std::size_t(w)];
        words.push_back({{"letters", x.letters},
                         {"count", x.count()},
                         {"level", x.level},
                         {"homogeneity", L.homogeneity(w)},
                         {"beta", L.betas.beta[std::size_t(w)]}});
    }
    j["words"] = words;
    json classes = json::array();
    for (const auto& [count, level] : L.betas.classes) classes.push_back({count, level});
    j["beta"] = {{"interval", {L.betas.lo, L.betas.hi}},
                 {"margin", L.betas.margin},
                 {"classes", classes},
                 {"note", "exponents taken on an even grid inside (2/5, alpha)"}};
    return j.dump(2) + "\n";
}

}  // namespace paracalc
