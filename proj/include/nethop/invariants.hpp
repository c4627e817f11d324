#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "interference.hpp"
#include "patterns.hpp"

namespace nethop {

//! Structural checks on an index: V_g ⊆ V̄_g, child nesting, sibling
//! disjointness of V̄, root contents, prefix law of node signatures.
//! Returns one message per violation; empty means all hold.
inline std::vector<std::string> index_violations(const PatternIndex& index, std::span<const NodeObservation> obs)
{
    std::vector<std::string> out;
    auto subset = [](const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
        return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    const auto& root = index.entry(0);
    if (root.members.size() != index.num_nodes())
        out.push_back("root V̄ is not every node");
    const auto controls = static_cast<std::size_t>(
        std::count_if(obs.begin(), obs.end(), [](const auto& o) { return o.z == 0; }));
    if (root.controls.size() != controls)
        out.push_back("root V is not every control");

    for (EntryId id = 0; id < index.size(); ++id) {
        const auto& e = index.entry(id);
        if (!subset(e.controls, e.members))
            out.push_back("V not within V̄ at (" + e.key.to_string() + ")");
        if (id != 0) {
            const auto& p = index.entry(e.parent);
            if (!subset(e.members, p.members) || !subset(e.controls, p.controls))
                out.push_back("child sets not nested at (" + e.key.to_string() + ")");
            if (p.key != parent(e.key))
                out.push_back("parent link inconsistent at (" + e.key.to_string() + ")");
        }
        const auto& ch = e.children;
        for (std::size_t a = 0; a < ch.size(); ++a)
            for (std::size_t b = a + 1; b < ch.size(); ++b) {
                const auto& ma = index.entry(ch[a].second).members;
                const auto& mb = index.entry(ch[b].second).members;
                std::vector<NodeId> both;
                std::set_intersection(ma.begin(), ma.end(), mb.begin(), mb.end(), std::back_inserter(both));
                if (!both.empty())
                    out.push_back("siblings overlap under (" + e.key.to_string() + ")");
            }
    }
    for (NodeId i = 0; i < index.num_nodes(); ++i) {
        const auto path = index.node_path(i);
        const auto& s = index.node_signature(i);
        for (std::size_t d = 0; d < path.size(); ++d)
            if (index.entry(path[d]).key != s.prefix(d))
                out.push_back("prefix law broken for node " + std::to_string(i));
    }
    return out;
}

//! K̂ ancestor-closed and every kept key estimable; fit consistent with it.
inline std::vector<std::string> fit_violations(const InterferenceFit& fit)
{
    std::vector<std::string> out;
    std::vector<PatternKey> kept;
    for (const auto& k : fit.kept) {
        kept.push_back(k.key);
        if (k.n_controls == 0)
            out.push_back("kept key with empty V (" + k.key.to_string() + ")");
    }
    std::sort(kept.begin(), kept.end());
    auto is_kept = [&](const PatternKey& k) { return std::binary_search(kept.begin(), kept.end(), k); };
    if (!is_kept(PatternKey{}))
        out.push_back("root not kept");
    for (const auto& k : kept)
        if (!k.is_root() && !is_kept(parent(k)))
            out.push_back("kept set not ancestor-closed at (" + k.to_string() + ")");
    for (std::size_t i = 0; i < fit.m_hat.size(); ++i) {
        if (fit.g_hat[i].depth() != fit.m_hat[i] || !is_kept(fit.g_hat[i]))
            out.push_back("node " + std::to_string(i) + " selected key inconsistent");
        if (fit.m_hat[i] > fit.config.max_depth)
            out.push_back("node " + std::to_string(i) + " m_hat beyond depth cap");
    }
    return out;
}

} // namespace nethop
