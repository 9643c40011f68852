#ifndef RSGNN_BELIEF_HPP
#define RSGNN_BELIEF_HPP

// Random-set machinery over a finite class universe: focal families,
// Moebius inversion between belief and mass, the pignistic transform,
// singleton credal bounds and belief-space target encodings.
//
// Vectors are indexed by position in a FocalFamily (length K) or by class
// (length C). Sets are represented as sorted member lists plus a bit mask.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "rsgnn/errors.hpp"
#include "rsgnn/matrix.hpp"

namespace rsgnn {

using ClassMask = std::uint64_t;

/// Additive constant inside every logarithm.
inline constexpr double kLogEps = 1e-8;

/// Largest universe for which the full power set may be enumerated.
inline constexpr int kMaxPowerSetClasses = 16;

/// Largest universe representable by a ClassMask.
inline constexpr int kMaxClasses = 64;

using BeliefVector = std::vector<double>;     // length K
using MassVector = std::vector<double>;       // length K
using PignisticVector = std::vector<double>;  // length C

struct ClassUniverse {
    int num_classes = 0;
    std::vector<std::string> class_names;

    ClassUniverse() = default;
    explicit ClassUniverse(int c, std::vector<std::string> names = {})
        : num_classes(c), class_names(std::move(names)) {
        if (c < 2) throw std::invalid_argument("class universe needs at least 2 classes");
        if (c > kMaxClasses) throw std::invalid_argument("class universe limited to 64 classes");
        if (!class_names.empty() && static_cast<int>(class_names.size()) != c)
            throw std::invalid_argument("class_names must have one entry per class");
    }

    ClassMask full_mask() const noexcept {
        return num_classes == 64 ? ~ClassMask{0} : ((ClassMask{1} << num_classes) - 1);
    }
};

/// One nonzero entry of the Moebius matrix: family index `index` with
/// coefficient (-1)^{|A_k \ A_j|}.
struct MobiusTerm {
    std::size_t index;
    int sign;
};

/// Canonical order: ascending cardinality, then lexicographic on sorted
/// member indices.
inline bool canonical_less(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline std::vector<int> mask_members(ClassMask m) {
    std::vector<int> out;
    while (m) {
        out.push_back(std::countr_zero(m));
        m &= m - 1;
    }
    return out;
}

/// Ordered, immutable collection of nonempty class subsets containing every
/// singleton. Holds the Moebius and pignistic maps in sparse form; dense
/// matrices are available on request.
class FocalFamily {
public:
    FocalFamily() = default;

    /// Validates and canonicalizes an arbitrary list of sets. Throws
    /// std::invalid_argument on empty/duplicate/out-of-range sets or a
    /// missing singleton.
    static FocalFamily from_sets(ClassUniverse universe, std::vector<std::vector<int>> sets) {
        const int c = universe.num_classes;
        std::vector<ClassMask> seen;
        for (auto& s : sets) {
            if (s.empty()) throw std::invalid_argument("focal family may not contain the empty set");
            std::sort(s.begin(), s.end());
            if (std::adjacent_find(s.begin(), s.end()) != s.end())
                throw std::invalid_argument("focal set lists a class twice");
            if (s.front() < 0 || s.back() >= c) throw std::invalid_argument("focal set member out of range");
        }
        std::sort(sets.begin(), sets.end(), [](const auto& a, const auto& b) { return canonical_less(a, b); });
        if (std::adjacent_find(sets.begin(), sets.end()) != sets.end())
            throw std::invalid_argument("focal family contains a duplicate set");

        FocalFamily f;
        f.universe_ = std::move(universe);
        f.sets_ = std::move(sets);
        f.masks_.reserve(f.sets_.size());
        for (const auto& s : f.sets_) {
            ClassMask m = 0;
            for (int i : s) m |= ClassMask{1} << i;
            f.masks_.push_back(m);
        }
        for (int i = 0; i < c; ++i) {
            if (f.sets_.size() <= static_cast<std::size_t>(i) || f.masks_[i] != (ClassMask{1} << i))
                throw std::invalid_argument("focal family must contain every singleton");
        }
        f.build_maps();
        return f;
    }

    const ClassUniverse& universe() const noexcept { return universe_; }
    int num_classes() const noexcept { return universe_.num_classes; }
    std::size_t size() const noexcept { return sets_.size(); }

    std::span<const int> members(std::size_t k) const { return sets_.at(k); }
    ClassMask mask(std::size_t k) const { return masks_.at(k); }
    std::size_t cardinality(std::size_t k) const { return sets_.at(k).size(); }
    const std::vector<std::vector<int>>& sets() const noexcept { return sets_; }

    /// Singletons come first in canonical order, so {i} sits at index i.
    std::size_t singleton_index(int cls) const noexcept { return static_cast<std::size_t>(cls); }

    std::optional<std::size_t> index_of(ClassMask m) const {
        auto it = lookup_.find(m);
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    bool is_full_power_set() const noexcept {
        return num_classes() < 64 && sets_.size() == (std::size_t{1} << num_classes()) - 1;
    }

    /// Family members contained in A_k, with their Moebius coefficients.
    const std::vector<MobiusTerm>& subsets_of(std::size_t k) const { return subsets_.at(k); }

    /// Dense K x K matrix M with mass = bel * M (row-vector convention).
    Matrix mobius_matrix() const {
        Matrix m(size(), size());
        for (std::size_t k = 0; k < size(); ++k)
            for (const auto& t : subsets_[k]) m(t.index, k) = t.sign;
        return m;
    }

    /// Dense K x C matrix P with P[k][i] = 1/|A_k| for i in A_k.
    Matrix pignistic_matrix() const {
        Matrix p(size(), static_cast<std::size_t>(num_classes()));
        for (std::size_t k = 0; k < size(); ++k) {
            const double w = 1.0 / static_cast<double>(sets_[k].size());
            for (int i : sets_[k]) p(k, static_cast<std::size_t>(i)) = w;
        }
        return p;
    }

    std::string set_label(std::size_t k) const {
        std::string out = "{";
        for (std::size_t i = 0; i < sets_[k].size(); ++i) {
            if (i) out += ",";
            out += std::to_string(sets_[k][i]);
        }
        return out + "}";
    }

    friend bool operator==(const FocalFamily& a, const FocalFamily& b) {
        return a.universe_.num_classes == b.universe_.num_classes && a.sets_ == b.sets_;
    }

private:
    void build_maps() {
        lookup_.clear();
        for (std::size_t k = 0; k < masks_.size(); ++k) lookup_.emplace(masks_[k], k);
        subsets_.assign(masks_.size(), {});
        for (std::size_t k = 0; k < masks_.size(); ++k) {
            const ClassMask full = masks_[k];
            const int card = std::popcount(full);
            // Walk every nonempty submask of A_k; keep the ones in the family.
            for (ClassMask sub = full; sub != 0; sub = (sub - 1) & full) {
                auto it = lookup_.find(sub);
                if (it == lookup_.end()) continue;
                const int diff = card - std::popcount(sub);
                subsets_[k].push_back({it->second, (diff % 2 == 0) ? 1 : -1});
            }
            std::sort(subsets_[k].begin(), subsets_[k].end(),
                      [](const MobiusTerm& a, const MobiusTerm& b) { return a.index < b.index; });
        }
    }

    ClassUniverse universe_;
    std::vector<std::vector<int>> sets_;
    std::vector<ClassMask> masks_;
    std::unordered_map<ClassMask, std::size_t> lookup_;
    std::vector<std::vector<MobiusTerm>> subsets_;
};

// ---------------------------------------------------------------------------
// Family construction
// ---------------------------------------------------------------------------

/// All 2^C - 1 nonempty subsets in canonical order.
inline FocalFamily enumerate_power_set(const ClassUniverse& universe) {
    if (universe.num_classes > kMaxPowerSetClasses)
        throw std::invalid_argument("power set enumeration limited to " + std::to_string(kMaxPowerSetClasses) +
                                    " classes, got " + std::to_string(universe.num_classes));
    std::vector<std::vector<int>> sets;
    const ClassMask full = universe.full_mask();
    sets.reserve(static_cast<std::size_t>(full));
    for (ClassMask m = 1; m <= full; ++m) sets.push_back(mask_members(m));
    return FocalFamily::from_sets(universe, std::move(sets));
}

inline FocalFamily singletons_only(const ClassUniverse& universe) {
    std::vector<std::vector<int>> sets;
    for (int i = 0; i < universe.num_classes; ++i) sets.push_back({i});
    return FocalFamily::from_sets(universe, std::move(sets));
}

namespace detail {
template <typename F>
void for_each_combination(int n, int r, F&& f) {
    std::vector<int> idx(static_cast<std::size_t>(r));
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
        f(std::span<const int>(idx));
        int i = r - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - r + i) --i;
        if (i < 0) return;
        ++idx[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < r; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
}
}  // namespace detail

/// Singletons plus the `budget` highest-scoring non-singleton sets of
/// cardinality 2..max_card. A pair {i,j} scores confusion[i][j] +
/// confusion[j][i]; a larger set scores the sum over its internal pairs.
/// Ties keep canonical order. The diagonal of `confusion` is ignored.
inline FocalFamily budget_focal_family(const ClassUniverse& universe, const Matrix& confusion, int budget,
                                       int max_card) {
    const int c = universe.num_classes;
    if (budget < 0) throw std::invalid_argument("focal budget must be nonnegative");
    if (max_card < 2 || max_card > c) throw std::invalid_argument("max_card must lie in [2, C]");
    if (confusion.rows() != static_cast<std::size_t>(c) || confusion.cols() != static_cast<std::size_t>(c))
        throw std::invalid_argument("confusion matrix must be C x C");
    for (double v : confusion.values())
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("confusion entries must be finite and >= 0");

    struct Candidate {
        std::vector<int> members;
        double score;
    };
    std::vector<Candidate> candidates;
    for (int card = 2; card <= max_card; ++card) {
        detail::for_each_combination(c, card, [&](std::span<const int> s) {
            double score = 0.0;
            for (std::size_t a = 0; a < s.size(); ++a)
                for (std::size_t b = a + 1; b < s.size(); ++b) {
                    const auto i = static_cast<std::size_t>(s[a]);
                    const auto j = static_cast<std::size_t>(s[b]);
                    score += confusion(i, j) + confusion(j, i);
                }
            candidates.push_back({std::vector<int>(s.begin(), s.end()), score});
        });
    }
    // Candidates were generated in canonical order; a stable sort on score
    // therefore breaks ties canonically.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    const auto keep = std::min(candidates.size(), static_cast<std::size_t>(budget));

    std::vector<std::vector<int>> sets;
    for (int i = 0; i < c; ++i) sets.push_back({i});
    for (std::size_t k = 0; k < keep; ++k) sets.push_back(std::move(candidates[k].members));
    return FocalFamily::from_sets(universe, std::move(sets));
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

namespace detail {
inline void require_len(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(want) + ", got " +
                                    std::to_string(got));
}
}  // namespace detail

/// mass = bel * M. On a budgeted family the alternating sum only runs over
/// family members, so this is a true inverse of mass_to_bel only on the
/// full power set.
inline MassVector bel_to_mass(std::span<const double> bel, const FocalFamily& family) {
    detail::require_len(bel.size(), family.size(), "bel_to_mass");
    MassVector mass(family.size(), 0.0);
    for (std::size_t k = 0; k < family.size(); ++k) {
        double s = 0.0;
        for (const auto& t : family.subsets_of(k)) s += t.sign * bel[t.index];
        mass[k] = s;
    }
    return mass;
}

/// Bel(A_j) = sum of m(A_k) over family members A_k contained in A_j.
inline BeliefVector mass_to_bel(std::span<const double> mass, const FocalFamily& family) {
    detail::require_len(mass.size(), family.size(), "mass_to_bel");
    BeliefVector bel(family.size(), 0.0);
    for (std::size_t j = 0; j < family.size(); ++j) {
        double s = 0.0;
        for (const auto& t : family.subsets_of(j)) s += mass[t.index];
        bel[j] = s;
    }
    return bel;
}

/// Clamps negative masses to zero and renormalizes. Returns nullopt when
/// nothing positive is left.
inline std::optional<MassVector> sanitize_mass(std::span<const double> mass) {
    MassVector out(mass.begin(), mass.end());
    double total = 0.0;
    for (auto& m : out) {
        if (!(m > 0.0)) m = 0.0;
        total += m;
    }
    if (!(total > kLogEps)) return std::nullopt;
    for (auto& m : out) m /= total;
    return out;
}

/// Unnormalized pignistic row mass * P.
inline std::vector<double> raw_pignistic(std::span<const double> mass, const FocalFamily& family) {
    detail::require_len(mass.size(), family.size(), "raw_pignistic");
    std::vector<double> out(static_cast<std::size_t>(family.num_classes()), 0.0);
    for (std::size_t k = 0; k < family.size(); ++k) {
        const auto members = family.members(k);
        const double share = mass[k] / static_cast<double>(members.size());
        for (int i : members) out[static_cast<std::size_t>(i)] += share;
    }
    return out;
}

/// BetP = norm(clamp(mass * P)). Falls back to uniform when the clamped row
/// sums to at most kLogEps.
inline PignisticVector mass_to_betp(std::span<const double> mass, const FocalFamily& family) {
    PignisticVector p = raw_pignistic(mass, family);
    double total = 0.0;
    for (auto& v : p) {
        if (!(v > 0.0)) v = 0.0;
        total += v;
    }
    if (!(total > kLogEps)) {
        std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
        return p;
    }
    for (auto& v : p) v /= total;
    return p;
}

struct CredalInterval {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Singleton lower/upper probabilities on the sanitized mass. A mass with
/// no positive entry is treated as vacuous.
inline CredalInterval credal_bounds(std::span<const double> mass, const FocalFamily& family) {
    detail::require_len(mass.size(), family.size(), "credal_bounds");
    const auto c = static_cast<std::size_t>(family.num_classes());
    CredalInterval out{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
    const auto clean = sanitize_mass(mass);
    if (!clean) {
        std::fill(out.upper.begin(), out.upper.end(), 1.0);
        return out;
    }
    for (std::size_t i = 0; i < c; ++i) out.lower[i] = (*clean)[family.singleton_index(static_cast<int>(i))];
    for (std::size_t k = 0; k < family.size(); ++k)
        for (int i : family.members(k)) out.upper[static_cast<std::size_t>(i)] += (*clean)[k];
    // Renormalization can leave the upper bound a few ulps above one.
    for (auto& u : out.upper) u = std::min(u, 1.0);
    return out;
}

inline double credal_width(const CredalInterval& interval, int predicted_class) {
    const auto i = static_cast<std::size_t>(predicted_class);
    if (predicted_class < 0 || i >= interval.lower.size()) throw std::invalid_argument("credal_width: class out of range");
    return interval.upper[i] - interval.lower[i];
}

/// Shannon entropy (nats) with kLogEps inside the log.
inline double pignistic_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p) h -= v * std::log(v + kLogEps);
    return h;
}

inline std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

/// Bel_target(A) = 1 if label is in A.
inline BeliefVector target_belief_encoding(int label, const FocalFamily& family) {
    if (label < 0 || label >= family.num_classes()) throw std::invalid_argument("target label out of range");
    const ClassMask bit = ClassMask{1} << label;
    BeliefVector t(family.size(), 0.0);
    for (std::size_t k = 0; k < family.size(); ++k) t[k] = (family.mask(k) & bit) ? 1.0 : 0.0;
    return t;
}

// ---------------------------------------------------------------------------
// Text serialization: "C K" header, then one line of sorted members per set.
// ---------------------------------------------------------------------------

inline void write_family(std::ostream& os, const FocalFamily& family) {
    os << family.num_classes() << ' ' << family.size() << '\n';
    for (const auto& s : family.sets()) {
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i];
        os << '\n';
    }
}

inline FocalFamily read_family(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("family file: missing header");
    std::istringstream header(line);
    long c = 0;
    long k = 0;
    if (!(header >> c >> k) || c < 2 || k < c) throw DataError("family file: malformed header '" + line + "'");
    std::vector<std::vector<int>> sets;
    while (static_cast<long>(sets.size()) < k && std::getline(is, line)) {
        std::istringstream row(line);
        std::vector<int> s;
        int v = 0;
        while (row >> v) s.push_back(v);
        if (!row.eof()) throw DataError("family file: malformed set line '" + line + "'");
        sets.push_back(std::move(s));
    }
    if (static_cast<long>(sets.size()) != k) throw DataError("family file: expected " + std::to_string(k) + " sets");
    try {
        return FocalFamily::from_sets(ClassUniverse(static_cast<int>(c)), std::move(sets));
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("family file: ") + e.what());
    }
}

}  // namespace rsgnn

#endif  // RSGNN_BELIEF_HPP
