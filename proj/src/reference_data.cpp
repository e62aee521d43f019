#include "paracalc/reference_data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "paracalc/correctors.hpp"
#include "paracalc/errors.hpp"
#include "paracalc/littlewood_paley.hpp"
#include "paracalc/parallel.hpp"
#include "paracalc/rng.hpp"

namespace paracalc {

namespace {

std::size_t partner_index(const SpaceGrid& g, std::size_t idx)
{
    const std::size_t n = std::size_t(g.n);
    if (g.dim == 1) return (n - idx) % n;
    const std::size_t i0 = idx / n, i1 = idx % n;
    return ((n - i0) % n) * n + (n - i1) % n;
}

std::string join_ids(const Alphabet& A, const std::vector<int>& xs, const char* sep)
{
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? sep : "") + A.letters[std::size_t(xs[i])].id;
    return s;
}

int level_sum(const Alphabet& A, const std::vector<int>& xs)
{
    int s = 0;
    for (int x : xs) s += A.letters[std::size_t(x)].level;
    return s;
}

double nominal_exponent(const Alphabet& A, const TermKey& k)
{
    const double e = A.alpha * level_sum(A, k.letters);
    switch (k.kind) {
    case TermKind::zeta1: return e + A.alpha - 2.0;
    case TermKind::zeta2_word:
    case TermKind::zeta2_sentence: return e - 2.0;
    case TermKind::zeta_v: return e - 1.0;
    }
    return e;
}

/// Source term of an unchained zeta-type letter.
std::optional<TermKey> source_key(const Letter& l)
{
    switch (l.kind) {
    case LetterKind::zeta1: return TermKey{TermKind::zeta1, l.children, -1};
    case LetterKind::zeta2_word: return TermKey{TermKind::zeta2_word, l.children, -1};
    case LetterKind::zeta2_sentence: return TermKey{TermKind::zeta2_sentence, l.children, -1};
    case LetterKind::vector_field: return TermKey{TermKind::zeta_v, l.children, l.axis};
    default: return std::nullopt;
    }
}

const SpaceTimeField& need(const std::vector<std::optional<SpaceTimeField>>& done, int i, const Alphabet& A)
{
    require(i >= 0 && std::size_t(i) < done.size() && done[std::size_t(i)].has_value(), ErrorKind::internal,
            "letter evaluation: child " + std::to_string(i) + " is not evaluated yet");
    (void)A;
    return *done[std::size_t(i)];
}

/// Letter from an already available source (term field or unchained letter).
SpaceTimeField letter_from_parts(const Alphabet& A, int letter, const std::vector<std::optional<SpaceTimeField>>& done,
                                 const SpaceTimeField* source, const SpaceTimeField& noise, const OperatorL& op)
{
    const Letter& l = A.letters[std::size_t(letter)];
    if (l.chain > 0) {
        auto below = A.unchained(letter);
        require(below.has_value(), ErrorKind::internal, "letter evaluation: chain without base for " + l.id);
        return duhamel_inverse(apply_lp(need(done, *below, A), op), op);
    }
    switch (l.kind) {
    case LetterKind::noise: return duhamel_inverse(noise, op);
    case LetterKind::resonant:
        return resonant(need(done, l.children[0], A), need(done, l.children[1], A));
    case LetterKind::merge: {
        const SpaceTimeField one = map_slices(noise, [](const Field& f) { return map_values(f, [](double) { return 1.0; }); });
        return merge_r(one, need(done, l.children[0], A), need(done, l.children[1], A), op);
    }
    default:
        require(source != nullptr, ErrorKind::internal, "letter evaluation: missing source for " + l.id);
        return duhamel_inverse(*source, op);
    }
}

}  // namespace

void validate(const NoiseSpec& spec, const SpaceGrid& g)
{
    require(spec.mol > 0.0 && std::isfinite(spec.mol), ErrorKind::configuration, "noise: mollification scale must be > 0");
    require(1.0 / spec.mol <= g.n / 2.0, ErrorKind::configuration,
            "noise: cutoff 1/mol = " + std::to_string(1.0 / spec.mol) + " exceeds the grid band N/2 = " +
                std::to_string(g.n / 2));
    require(std::isfinite(spec.amplitude), ErrorKind::configuration, "noise: amplitude must be finite");
    require(spec.time_modes >= 0 && spec.time_modes <= 8, ErrorKind::configuration, "noise: time modes must be in [0, 8]");
}

Field sample_noise_field(const NoiseSpec& spec, const SpaceGrid& g, std::uint64_t stream)
{
    validate(spec, g);
    Spectrum s{g, std::vector<cplx>(g.size(), cplx(0.0, 0.0))};
    const double mol = spec.mol;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Freq k = freq_at(g, i);
        if (k.nyquist) continue;
        const std::size_t p = partner_index(g, i);
        const std::size_t key = std::min(i, p);
        const double w = spec.amplitude * std::exp(-mol * mol * k.norm2());
        const double x = rng::normal(spec.seed, 2 * stream, key);
        if (p == i) {
            s.coeffs[i] = w * x;
            continue;
        }
        const double y = rng::normal(spec.seed, 2 * stream + 1, key);
        const cplx c = w * cplx(x, y) / std::numbers::sqrt2;
        s.coeffs[i] = i < p ? c : std::conj(c);
    }
    return inverse(s);
}

SpaceTimeField sample_noise(const NoiseSpec& spec, const SpaceGrid& g, int steps, double dt)
{
    require(steps >= 1 && dt > 0.0, ErrorKind::configuration, "noise: need at least one time step");
    const Field base = sample_noise_field(spec, g, 0);
    if (!spec.time_dependent || spec.time_modes == 0) return SpaceTimeField::constant_in_time(base, steps, dt);
    std::vector<Field> cosines, sines;
    for (int q = 1; q <= spec.time_modes; ++q) {
        cosines.push_back(sample_noise_field(spec, g, std::uint64_t(2 * q - 1)));
        sines.push_back(sample_noise_field(spec, g, std::uint64_t(2 * q)));
    }
    const double T = steps * dt, norm = 1.0 / std::sqrt(1.0 + 2.0 * spec.time_modes);
    std::vector<Field> slices;
    for (int m = 0; m <= steps; ++m) {
        Field f = base;
        for (int q = 1; q <= spec.time_modes; ++q) {
            const double ph = 2.0 * std::numbers::pi * q * (m * dt) / T;
            f = f + std::cos(ph) * cosines[std::size_t(q - 1)] + std::sin(ph) * sines[std::size_t(q - 1)];
        }
        slices.push_back(norm * f);
    }
    return SpaceTimeField(std::move(slices), dt);
}

std::string to_string(TermKind k)
{
    switch (k) {
    case TermKind::zeta1: return "zeta1";
    case TermKind::zeta2_word: return "zeta2_word";
    case TermKind::zeta2_sentence: return "zeta2_sentence";
    case TermKind::zeta_v: return "zeta_v";
    }
    return "?";
}

std::string term_id(const Alphabet& A, const TermKey& key)
{
    switch (key.kind) {
    case TermKind::zeta1: return "zeta1[" + join_ids(A, key.letters, ",") + "]";
    case TermKind::zeta2_word: return "zeta2[" + join_ids(A, key.letters, ",") + "]";
    case TermKind::zeta2_sentence: return "zeta2[" + join_ids(A, key.letters, "|") + "]";
    case TermKind::zeta_v: return "zetaV" + std::to_string(key.axis) + "[" + join_ids(A, key.letters, ",") + "]";
    }
    return "?";
}

ExponentCheck measure_exponent(const SpaceTimeField& f, double nominal)
{
    constexpr double roundoff_floor = 1e-10;
    ExponentCheck c;
    c.nominal = nominal;
    const Field& last = f.final_slice();
    if (last.sup_norm() == 0.0) {
        c.smooth = true;
        return c;
    }
    auto sups = decompose(last).block_sups;
    const double top = *std::max_element(sups.begin(), sups.end());
    for (double& x : sups)
        if (x < roundoff_floor * top) x = 0.0;
    try {
        const auto e = estimate_from_sups(sups, 0, last.grid().jmax());
        c.measured = e.alpha;
        c.r2 = e.r2;
    } catch (const Error& err) {
        if (err.kind() != ErrorKind::degenerate_input) throw;
        c.smooth = true;
    }
    return c;
}

SpaceTimeField zeta_defect(const SpaceTimeField& x, const SpaceTimeField& noise)
{
    return product(x, noise) - para(x, noise);
}

SpaceTimeField product_defect(const SpaceTimeField& x, const SpaceTimeField& y) { return product(x, y) - para(x, y); }

SpaceTimeField apply_lp(const SpaceTimeField& f, const OperatorL& op) { return -1.0 * apply_L(f, op); }

const ReferenceTerm* ReferenceData::find(const TermKey& key) const
{
    auto it = index_.find(key);
    return it == index_.end() ? nullptr : &terms[std::size_t(it->second)];
}

const SpaceTimeField& ReferenceData::term(const TermKey& key) const
{
    const ReferenceTerm* t = find(key);
    if (!t) fail(ErrorKind::incomplete, "reference data: missing term " + term_id(layout.alphabet, key));
    return t->field;
}

std::vector<TermKey> required_terms(const SystemLayout& L)
{
    std::vector<TermKey> keys;
    for (const Word& w : L.words) {
        if (w.empty()) continue;
        if (w.count() <= 2 && w.level <= 2) keys.push_back({TermKind::zeta1, w.letters, -1});
    }
    for (const Word& w : L.words)
        if (w.count() >= 2 && w.level <= 3) keys.push_back({TermKind::zeta2_word, w.letters, -1});
    for (const Word& w : L.words)
        if (w.count() >= 2 && w.level <= 3) keys.push_back({TermKind::zeta2_sentence, w.letters, -1});
    for (int l = 0; l < L.alphabet.size(); ++l)
        if (L.alphabet.letters[std::size_t(l)].level == 1)
            for (int j = 0; j < L.alphabet.vector_fields; ++j) keys.push_back({TermKind::zeta_v, {l}, j});
    return keys;
}

SpaceTimeField evaluate_term(const TermKey& key, const std::vector<SpaceTimeField>& letters, const SpaceTimeField& noise,
                             const OperatorL& op)
{
    auto at = [&](std::size_t i) -> const SpaceTimeField& {
        const int l = key.letters[i];
        require(l >= 0 && std::size_t(l) < letters.size(), ErrorKind::internal, "term evaluation: letter out of range");
        return letters[std::size_t(l)];
    };
    const std::size_t n = key.letters.size();
    switch (key.kind) {
    case TermKind::zeta1:
        if (n == 1) return zeta_defect(at(0), noise);
        if (n == 2) return zeta_defect(para_tilde(at(1), at(0), op), noise) - para(at(1), zeta_defect(at(0), noise));
        break;
    case TermKind::zeta2_word:
        if (n == 2) return -1.0 * commutator_l<SpaceTimeField>({at(1)}, at(0), op);
        if (n == 3) return -1.0 * commutator_l<SpaceTimeField>({at(2), at(1)}, at(0), op);
        break;
    case TermKind::zeta2_sentence:
        if (n == 2) return product_defect(at(0), apply_lp(at(1), op));
        if (n == 3) return 0.5 * product_defect(product(at(0), at(1)), apply_lp(at(2), op));
        break;
    case TermKind::zeta_v:
        if (n == 1) return apply_V(at(0), op, key.axis);
        break;
    }
    fail(ErrorKind::unsupported, "term evaluation: unsupported " + to_string(key.kind) + " with " + std::to_string(n) +
                                     " letters");
}

SpaceTimeField evaluate_letter(const Alphabet& A, int letter, const std::vector<std::optional<SpaceTimeField>>& done,
                               const SpaceTimeField& noise, const OperatorL& op)
{
    require(letter >= 0 && letter < A.size(), ErrorKind::internal, "letter evaluation: index out of range");
    const Letter& l = A.letters[std::size_t(letter)];
    if (l.chain == 0) {
        if (auto key = source_key(l)) {
            std::vector<SpaceTimeField> kids(done.size());
            for (int c : key->letters) kids[std::size_t(c)] = need(done, c, A);
            const SpaceTimeField src = evaluate_term(*key, kids, noise, op);
            return letter_from_parts(A, letter, done, &src, noise, op);
        }
    }
    return letter_from_parts(A, letter, done, nullptr, noise, op);
}

ReferenceData build_reference_data(const SystemLayout& L, const NoiseSpec& spec, const SpaceGrid& g, int steps,
                                   double dt, const OperatorL& op)
{
    ReferenceData R;
    R.layout = L;
    R.noise_spec = spec;
    R.op = op;
    R.noise = sample_noise(spec, g, steps, dt);
    const Alphabet& A = L.alphabet;
    const int nl = A.size();

    const auto keys = required_terms(L);
    for (std::size_t t = 0; t < keys.size(); ++t) R.index_[keys[t]] = int(t);

    // Node graph: letters 0..nl-1, terms nl..
    const int nodes = nl + int(keys.size());
    std::vector<std::vector<int>> deps(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nl; ++i) {
        const Letter& l = A.letters[std::size_t(i)];
        if (l.chain > 0) {
            auto below = A.unchained(i);
            require(below.has_value(), ErrorKind::internal, "reference data: chain without base for " + l.id);
            deps[std::size_t(i)] = {*below};
        } else if (auto key = source_key(l)) {
            auto it = R.index_.find(*key);
            require(it != R.index_.end(), ErrorKind::internal, "reference data: no source term for " + l.id);
            deps[std::size_t(i)] = {nl + it->second};
        } else {
            deps[std::size_t(i)] = l.children;
        }
    }
    for (std::size_t t = 0; t < keys.size(); ++t) deps[std::size_t(nl) + t] = keys[t].letters;

    std::vector<int> depth(std::size_t(nodes), -1), state(std::size_t(nodes), 0);
    std::function<int(int)> visit = [&](int v) -> int {
        if (state[std::size_t(v)] == 2) return depth[std::size_t(v)];
        require(state[std::size_t(v)] == 0, ErrorKind::internal, "reference data: recipe cycle");
        state[std::size_t(v)] = 1;
        int d = 0;
        for (int u : deps[std::size_t(v)]) d = std::max(d, visit(u) + 1);
        state[std::size_t(v)] = 2;
        return depth[std::size_t(v)] = d;
    };
    int max_depth = 0;
    for (int v = 0; v < nodes; ++v) max_depth = std::max(max_depth, visit(v));

    std::vector<std::optional<SpaceTimeField>> letters(static_cast<std::size_t>(nl));
    std::vector<SpaceTimeField> term_fields(keys.size());
    for (int d = 0; d <= max_depth; ++d) {
        std::vector<int> wave;
        for (int v = 0; v < nodes; ++v)
            if (depth[std::size_t(v)] == d) wave.push_back(v);
        parallel_for(wave.size(), [&](std::size_t w) {
            const int v = wave[w];
            if (v < nl) {
                const Letter& l = A.letters[std::size_t(v)];
                const SpaceTimeField* src = nullptr;
                if (l.chain == 0 && source_key(l)) src = &term_fields[std::size_t(deps[std::size_t(v)][0] - nl)];
                letters[std::size_t(v)] = letter_from_parts(A, v, letters, src, R.noise, op);
            } else {
                const auto& key = keys[std::size_t(v - nl)];
                std::vector<SpaceTimeField> kids(static_cast<std::size_t>(nl));
                for (int c : key.letters) kids[std::size_t(c)] = *letters[std::size_t(c)];
                term_fields[std::size_t(v - nl)] = evaluate_term(key, kids, R.noise, op);
            }
        });
    }

    R.letters.resize(std::size_t(nl));
    R.letter_exponents.resize(std::size_t(nl));
    R.letter_norms.resize(std::size_t(nl));
    parallel_for(std::size_t(nl), [&](std::size_t i) {
        R.letters[i] = std::move(*letters[i]);
        const double h = A.homogeneity(int(i));
        R.letter_exponents[i] = measure_exponent(R.letters[i], h);
        R.letter_norms[i] = parabolic_norm(R.letters[i], h);
    });
    R.terms.resize(keys.size());
    parallel_for(keys.size(), [&](std::size_t t) {
        ReferenceTerm& rt = R.terms[t];
        rt.key = keys[t];
        rt.id = term_id(A, keys[t]);
        rt.field = std::move(term_fields[t]);
        const double nominal = nominal_exponent(A, keys[t]);
        rt.exponent = measure_exponent(rt.field, nominal);
        rt.norm = parabolic_norm(rt.field, nominal);
    });
    return R;
}

std::vector<NormRecord> norm_records(const ReferenceData& refs)
{
    std::vector<NormRecord> out;
    const Alphabet& A = refs.layout.alphabet;
    for (int i = 0; i < A.size(); ++i) {
        const Letter& l = A.letters[std::size_t(i)];
        out.push_back({l.id, l.skeleton_id, l.n_tau, refs.letter_norms[std::size_t(i)]});
    }
    return out;
}

AssumptionAReport verify_assumption_a(const std::vector<NormRecord>& records, int chain_cap)
{
    require(chain_cap >= 2, ErrorKind::degenerate_input,
            "assumption (A): insufficient data, need chain cap >= 2 for three chain counts (got " +
                std::to_string(chain_cap) + ")");
    require(!records.empty(), ErrorKind::degenerate_input, "assumption (A): no letters");
    AssumptionAReport rep;
    bool all_zero = true;
    for (const auto& r : records) all_zero = all_zero && r.norm == 0.0;
    const std::string head = records.front().skeleton_id;
    if (all_zero) {
        rep.degenerate = true;
        rep.headline.skeleton_id = head;
        return rep;
    }

    std::map<std::string, std::vector<const NormRecord*>> groups;
    std::vector<std::string> order;
    for (const auto& r : records) {
        if (!groups.count(r.skeleton_id)) order.push_back(r.skeleton_id);
        groups[r.skeleton_id].push_back(&r);
    }
    for (const auto& sk : order) {
        const auto& pts = groups[sk];
        std::map<int, int> distinct;
        for (auto* p : pts)
            if (p->norm > 0.0) distinct[p->n_tau]++;
        if (distinct.size() < 2) continue;
        ClassFit c;
        c.skeleton_id = sk;
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (auto* p : pts) {
            if (p->norm <= 0.0) continue;
            const double x = p->n_tau, y = std::log(p->norm);
            sx += x, sy += y, sxx += x * x, sxy += x * y, ++m;
        }
        const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        const double icpt = (sy - slope * sx) / m;
        double ss_res = 0, ss_tot = 0;
        for (auto* p : pts) {
            if (p->norm <= 0.0) continue;
            const double y = std::log(p->norm), fit = icpt + slope * p->n_tau;
            ss_res += (y - fit) * (y - fit);
            ss_tot += (y - sy / m) * (y - sy / m);
        }
        c.points = m;
        c.k_fit = std::exp(icpt);
        c.c_fit = std::exp(slope);
        c.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
        for (auto* p : pts) {
            c.k_envelope = std::max(c.k_envelope, p->norm / std::pow(c.c_fit, p->n_tau));
            if (p->norm > c.k_fit * std::pow(c.c_fit, p->n_tau) * 1.1) c.within_tolerance = false;
        }
        if (sk == head) rep.headline = c;
        rep.classes.push_back(c);
    }
    require(rep.headline.skeleton_id == head, ErrorKind::degenerate_input,
            "assumption (A): the noise chain class has fewer than two nonzero chain counts");
    return rep;
}

std::string assumption_a_json(const AssumptionAReport& r)
{
    using nlohmann::json;
    auto cls = [](const ClassFit& c) {
        return json{{"skeleton", c.skeleton_id}, {"points", c.points},   {"k_fit", c.k_fit},
                    {"C_fit", c.c_fit},          {"r2", c.r2},           {"k_envelope", c.k_envelope},
                    {"within_10_percent", c.within_tolerance}};
    };
    json j;
    j["degenerate"] = r.degenerate;
    j["headline"] = cls(r.headline);
    j["classes"] = json::array();
    for (const auto& c : r.classes) j["classes"].push_back(cls(c));
    return j.dump(2) + "\n";
}

std::string reference_manifest_json(const ReferenceData& refs)
{
    using nlohmann::json;
    const Alphabet& A = refs.layout.alphabet;
    auto expo = [](const ExponentCheck& e) {
        return json{{"nominal", e.nominal}, {"measured", e.measured}, {"r2", e.r2}, {"smooth", e.smooth}, {"ok", e.ok()}};
    };
    json j;
    j["grid"] = {{"dim", refs.grid().dim}, {"n", refs.grid().n}};
    j["time"] = {{"steps", refs.steps()}, {"dt", refs.dt()}};
    j["c0"] = refs.op.c0;
    j["noise"] = {{"seed", refs.noise_spec.seed},
                  {"mol", refs.noise_spec.mol},
                  {"amplitude", refs.noise_spec.amplitude},
                  {"time_dependent", refs.noise_spec.time_dependent},
                  {"time_modes", refs.noise_spec.time_modes}};
    j["alphabet"] = {{"alpha", A.alpha}, {"order", A.order}, {"chain_cap", A.chain_cap},
                     {"vector_fields", A.vector_fields}};
    j["letters"] = json::array();
    for (int i = 0; i < A.size(); ++i) {
        const Letter& l = A.letters[std::size_t(i)];
        j["letters"].push_back({{"index", i},
                                {"id", l.id},
                                {"skeleton", l.skeleton_id},
                                {"level", l.level},
                                {"n_tau", l.n_tau},
                                {"norm", refs.letter_norms[std::size_t(i)]},
                                {"exponent", expo(refs.letter_exponents[std::size_t(i)])},
                                {"file", "letters/" + std::to_string(i) + ".pcf"}});
    }
    j["terms"] = json::array();
    for (std::size_t t = 0; t < refs.terms.size(); ++t) {
        const auto& rt = refs.terms[t];
        j["terms"].push_back({{"index", t},
                              {"id", rt.id},
                              {"kind", to_string(rt.key.kind)},
                              {"letters", rt.key.letters},
                              {"axis", rt.key.axis},
                              {"norm", rt.norm},
                              {"exponent", expo(rt.exponent)},
                              {"file", "terms/" + std::to_string(t) + ".pcf"}});
    }
    return j.dump(2) + "\n";
}

void write_reference_store(const ReferenceData& refs, const std::string& dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(dir) / "letters", ec);
    fs::create_directories(fs::path(dir) / "terms", ec);
    require(!ec, ErrorKind::io, "reference store: cannot create " + dir + ": " + ec.message());
    for (std::size_t i = 0; i < refs.letters.size(); ++i)
        write_pcf((fs::path(dir) / "letters" / (std::to_string(i) + ".pcf")).string(), refs.letters[i]);
    for (std::size_t t = 0; t < refs.terms.size(); ++t)
        write_pcf((fs::path(dir) / "terms" / (std::to_string(t) + ".pcf")).string(), refs.terms[t].field);
    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    require(bool(out), ErrorKind::io, "reference store: cannot write manifest in " + dir);
    out << reference_manifest_json(refs);
    require(bool(out), ErrorKind::io, "reference store: write failed in " + dir);
}

std::pair<std::vector<NormRecord>, int> read_store_norms(const std::string& dir)
{
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(dir) / "manifest.json", std::ios::binary);
    require(bool(in), ErrorKind::io, "reference store: no manifest.json in " + dir);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::io, std::string("reference store: malformed manifest: ") + e.what());
    }
    std::vector<NormRecord> out;
    try {
        for (const auto& l : j.at("letters"))
            out.push_back({l.at("id").get<std::string>(), l.at("skeleton").get<std::string>(), l.at("n_tau").get<int>(),
                           l.at("norm").get<double>()});
        return {out, j.at("alphabet").at("chain_cap").get<int>()};
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::io, std::string("reference store: manifest is missing fields: ") + e.what());
    }
}

}  // namespace paracalc
