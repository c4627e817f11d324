#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "parallel.hpp"

namespace nethop {

//! Treated-count signature of an ego's neighborhood: counts[k-1] is the number
//! of treated nodes at distance exactly k. The empty key is the root and
//! matches every node.
struct PatternKey {
    std::vector<std::uint32_t> counts;

    std::size_t depth() const noexcept { return counts.size(); }
    bool is_root() const noexcept { return counts.empty(); }

    //! The depth-d truncation.
    PatternKey prefix(std::size_t d) const
    {
        return PatternKey{{counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(std::min(d, depth()))}};
    }

    std::string to_string() const
    {
        std::string s;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (k)
                s += ',';
            s += std::to_string(counts[k]);
        }
        return s;
    }

    friend auto operator<=>(const PatternKey&, const PatternKey&) = default;
    friend bool operator==(const PatternKey&, const PatternKey&) = default;
};

inline PatternKey parent(const PatternKey& key)
{
    if (key.is_root())
        throw std::invalid_argument("parent: the root pattern has no parent");
    return key.prefix(key.depth() - 1);
}

//! g' ⪰ g: `ancestor` is a prefix of `descendant` (reflexive).
inline bool descends_from(const PatternKey& descendant, const PatternKey& ancestor)
{
    return ancestor.depth() <= descendant.depth()
        && std::equal(ancestor.counts.begin(), ancestor.counts.end(), descendant.counts.begin());
}

//! Depth-`depth` signature of `ego`. Layers beyond the ego's eccentricity
//! contribute zeros; the ego's own label never counts.
inline PatternKey signature(const Graph& g, std::span<const std::uint8_t> z, NodeId ego, std::size_t depth)
{
    if (ego >= g.num_nodes())
        throw std::invalid_argument("signature: ego out of range");
    PatternKey key{std::vector<std::uint32_t>(depth, 0)};
    LayerWalker walker(g);
    walker.walk(ego, depth, [&](std::size_t d, NodeId v) { key.counts[d - 1] += z[v]; });
    return key;
}

//! Signature of every node truncated at min(max_depth, eccentricity).
inline std::vector<PatternKey> node_signatures(const Graph& g, std::span<const std::uint8_t> z,
                                               std::size_t max_depth, std::size_t workers = 1)
{
    const std::size_t n = g.num_nodes();
    if (z.size() != n)
        throw InputError("label vector length does not match node count");
    std::vector<PatternKey> out(n);
    const std::size_t w = std::max<std::size_t>(1, std::min(workers, n));
    const std::size_t chunk = (n + w - 1) / w;
    parallel_for(w, w, [&](std::size_t worker) {
        LayerWalker walker(g);
        std::vector<std::uint32_t> counts(max_depth);
        for (std::size_t i = worker * chunk; i < std::min(n, (worker + 1) * chunk); ++i) {
            std::fill(counts.begin(), counts.end(), 0);
            const auto reached = walker.walk(static_cast<NodeId>(i), max_depth,
                                             [&](std::size_t d, NodeId v) { counts[d - 1] += z[v]; });
            out[i].counts.assign(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(reached));
        }
    });
    return out;
}

using EntryId = std::uint32_t;

//! Trie of pattern keys with control (V_g) and all-node (V̄_g) membership.
//! Entry 0 is the root; every entry's parent has a smaller id.
class PatternIndex {
public:
    struct Entry {
        PatternKey key;
        EntryId parent = 0;
        std::vector<std::pair<std::uint32_t, EntryId>> children; // sorted by count
        std::vector<NodeId> controls;                            // V_g, ascending
        std::vector<NodeId> members;                             // V̄_g, ascending
        double control_sum = 0.0;                                // Σ y over V_g
    };

    static constexpr EntryId npos = std::numeric_limits<EntryId>::max();

    std::size_t size() const noexcept { return entries_.size(); }
    const Entry& entry(EntryId id) const { return entries_.at(id); }
    std::span<const Entry> entries() const noexcept { return entries_; }
    std::size_t max_depth() const noexcept { return max_depth_; }
    std::size_t num_nodes() const noexcept { return signatures_.size(); }
    std::size_t dropped_keys() const noexcept { return dropped_; }

    //! Node i's real signature truncated at min(M, eccentricity).
    const PatternKey& node_signature(NodeId i) const { return signatures_.at(i); }

    //! Entries matched by node i's signature at depths 0, 1, ..., stopping at
    //! the first depth with no key.
    std::span<const EntryId> node_path(NodeId i) const { return paths_.at(i); }

    EntryId child(EntryId id, std::uint32_t count) const
    {
        const auto& ch = entries_[id].children;
        auto it = std::lower_bound(ch.begin(), ch.end(), std::pair{count, EntryId{0}});
        return (it != ch.end() && it->first == count) ? it->second : npos;
    }

    std::optional<EntryId> find(const PatternKey& key) const
    {
        EntryId at = 0;
        for (auto c : key.counts) {
            at = child(at, c);
            if (at == npos)
                return std::nullopt;
        }
        return at;
    }

    bool contains(const PatternKey& key) const { return find(key).has_value(); }

    std::vector<PatternKey> keys() const
    {
        std::vector<PatternKey> out;
        out.reserve(size());
        for (EntryId id : depth_first_order())
            out.push_back(entries_[id].key);
        return out;
    }

    //! Pre-order traversal, children visited in ascending count order.
    std::vector<EntryId> depth_first_order() const
    {
        std::vector<EntryId> order;
        order.reserve(size());
        std::vector<EntryId> stack{0};
        while (!stack.empty()) {
            EntryId id = stack.back();
            stack.pop_back();
            order.push_back(id);
            const auto& ch = entries_[id].children;
            for (auto it = ch.rbegin(); it != ch.rend(); ++it)
                stack.push_back(it->second);
        }
        return order;
    }

    // Construction helpers; use the build_* functions below.
    explicit PatternIndex(std::size_t max_depth) : max_depth_(max_depth) { entries_.emplace_back(); }

    EntryId insert_path(const PatternKey& key)
    {
        EntryId at = 0;
        for (std::size_t d = 0; d < key.depth(); ++d) {
            const auto c = key.counts[d];
            EntryId next = child(at, c);
            if (next == npos) {
                next = static_cast<EntryId>(entries_.size());
                Entry e;
                e.key = key.prefix(d + 1);
                e.parent = at;
                entries_.push_back(std::move(e));
                auto& ch = entries_[at].children;
                ch.insert(std::lower_bound(ch.begin(), ch.end(), std::pair{c, EntryId{0}}), {c, next});
            }
            at = next;
        }
        return at;
    }

    //! Matches every node's real signature against the existing keys and fills
    //! V_g, V̄_g, the outcome sums and the node paths.
    void assign_members(std::vector<PatternKey> signatures, std::span<const NodeObservation> obs)
    {
        signatures_ = std::move(signatures);
        paths_.assign(signatures_.size(), {});
        for (auto& e : entries_) {
            e.controls.clear();
            e.members.clear();
            e.control_sum = 0.0;
        }
        for (NodeId i = 0; i < signatures_.size(); ++i) {
            auto& path = paths_[i];
            EntryId at = 0;
            path.push_back(at);
            for (auto c : signatures_[i].counts) {
                at = child(at, c);
                if (at == npos)
                    break;
                path.push_back(at);
            }
            for (EntryId id : path) {
                auto& e = entries_[id];
                e.members.push_back(i);
                if (obs[i].z == 0) {
                    e.controls.push_back(i);
                    e.control_sum += obs[i].y;
                }
            }
        }
    }

    //! Removes every key whose V_g is empty (such keys form whole subtrees,
    //! since V-sets nest) and renumbers the rest, keeping parent < child.
    void drop_empty_controls(std::span<const NodeObservation> obs)
    {
        std::vector<EntryId> remap(entries_.size(), npos);
        std::vector<Entry> kept;
        for (EntryId id = 0; id < entries_.size(); ++id) {
            if (id != 0 && entries_[id].controls.empty())
                continue;
            if (id != 0 && remap[entries_[id].parent] == npos)
                continue;
            remap[id] = static_cast<EntryId>(kept.size());
            Entry e = std::move(entries_[id]);
            e.parent = id == 0 ? 0 : remap[e.parent];
            kept.push_back(std::move(e));
        }
        dropped_ += entries_.size() - kept.size();
        for (auto& e : kept) {
            std::vector<std::pair<std::uint32_t, EntryId>> ch;
            for (auto [c, old] : e.children)
                if (remap[old] != npos)
                    ch.emplace_back(c, remap[old]);
            e.children = std::move(ch);
        }
        entries_ = std::move(kept);
        assign_members(std::move(signatures_), obs);
    }

private:
    std::vector<Entry> entries_;
    std::vector<PatternKey> signatures_;
    std::vector<std::vector<EntryId>> paths_;
    std::size_t max_depth_;
    std::size_t dropped_ = 0;
};

//! Ê_n: keys observed at controls for depths 1..min(M, ecc), plus the root,
//! with V_g / V̄_g filled from every node's signature.
inline PatternIndex build_pattern_index(const Graph& g, std::span<const NodeObservation> obs, std::size_t max_depth,
                                        std::size_t workers = 1)
{
    if (max_depth < 1)
        throw std::invalid_argument("build_pattern_index: max_depth must be >= 1");
    validate_observations(g, obs);
    const auto z = labels_of(obs);
    if (std::none_of(z.begin(), z.end(), [](auto v) { return v == 0; }))
        throw EstimationError("no controls");
    auto sigs = node_signatures(g, z, max_depth, workers);
    PatternIndex index(max_depth);
    for (NodeId i = 0; i < sigs.size(); ++i)
        if (z[i] == 0)
            index.insert_path(sigs[i]);
    index.assign_members(std::move(sigs), obs);
    return index;
}

//! Ẽ_n°: keys produced by every node (treated or not) under the synthetic
//! labels, sorted, root included.
inline std::vector<PatternKey> build_synthetic_pattern_set(const Graph& g, std::span<const std::uint8_t> synthetic,
                                                           std::size_t max_depth, std::size_t workers = 1)
{
    if (max_depth < 1)
        throw std::invalid_argument("build_synthetic_pattern_set: max_depth must be >= 1");
    const auto sigs = node_signatures(g, synthetic, max_depth, workers);
    std::vector<PatternKey> keys{PatternKey{}};
    for (const auto& s : sigs)
        for (std::size_t d = 1; d <= s.depth(); ++d)
            keys.push_back(s.prefix(d));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    return keys;
}

//! Index over the synthetic key set Ẽ_n° with memberships taken from the real
//! labels; keys with no real control are dropped.
inline PatternIndex build_decoupled_index(const Graph& g, std::span<const NodeObservation> obs,
                                          std::span<const std::uint8_t> synthetic, std::size_t max_depth,
                                          std::size_t workers = 1)
{
    if (max_depth < 1)
        throw std::invalid_argument("build_decoupled_index: max_depth must be >= 1");
    validate_observations(g, obs);
    if (synthetic.size() != g.num_nodes())
        throw InputError("synthetic label vector length does not match node count");
    const auto z = labels_of(obs);
    if (std::none_of(z.begin(), z.end(), [](auto v) { return v == 0; }))
        throw EstimationError("no controls");
    PatternIndex index(max_depth);
    for (const auto& s : node_signatures(g, synthetic, max_depth, workers))
        index.insert_path(s);
    index.assign_members(node_signatures(g, z, max_depth, workers), obs);
    index.drop_empty_controls(obs);
    return index;
}

//! Text dump, one key per line in depth-first order:
//! depth<TAB>counts<TAB>|V_g|<TAB>|V̄_g|. The root's counts field is empty.
//! When `only` is given, entries with only[id] == false are skipped.
inline void dump_tree(std::ostream& out, const PatternIndex& index, const std::vector<bool>* only = nullptr)
{
    for (EntryId id : index.depth_first_order()) {
        if (only && !(*only)[id])
            continue;
        const auto& e = index.entry(id);
        out << e.key.depth() << '\t' << e.key.to_string() << '\t' << e.controls.size() << '\t' << e.members.size()
            << '\n';
    }
}

} // namespace nethop
