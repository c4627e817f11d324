#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "graph.hpp"

namespace nethop::csv {

namespace detail {

inline std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return fields;
}

template <class T>
std::optional<T> parse_number(std::string_view field)
{
    T value{};
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || field.empty())
        return std::nullopt;
    return value;
}

inline bool blank(std::string_view line) { return trim(line).empty(); }

} // namespace detail

struct EdgeList {
    std::vector<Edge> edges;
    std::size_t max_id_plus_one = 0;
};

//! One `u,v` pair per line, 0-based ids. Blank lines are skipped.
inline EdgeList read_edge_list(std::istream& in, bool has_header, const std::string& source = "edges")
{
    EdgeList out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (has_header && line_no == 1)
            continue;
        if (detail::blank(line))
            continue;
        const auto fields = detail::split(line);
        if (fields.size() != 2)
            throw ParseError(source, line_no, "expected 2 fields `u,v`, got " + std::to_string(fields.size()));
        const auto u = detail::parse_number<std::uint32_t>(fields[0]);
        const auto v = detail::parse_number<std::uint32_t>(fields[1]);
        if (!u || !v)
            throw ParseError(source, line_no, "node ids must be nonnegative integers");
        if (*u == *v)
            throw ParseError(source, line_no, "self-loop at node " + std::to_string(*u));
        out.edges.emplace_back(*u, *v);
        out.max_id_plus_one = std::max<std::size_t>(out.max_id_plus_one, std::max(*u, *v) + 1);
    }
    return out;
}

//! Node table with header `id,z,y[,x]`. Rows may come in any order but the
//! ids must be exactly {0,...,n-1}.
inline std::vector<NodeObservation> read_node_table(std::istream& in, const std::string& source = "nodes")
{
    std::string line;
    std::size_t line_no = 0;
    std::size_t expected_fields = 0;
    std::vector<std::optional<NodeObservation>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            const auto header = detail::split(line);
            if (header.size() < 3 || header.size() > 4 || header[0] != "id" || header[1] != "z" || header[2] != "y"
                || (header.size() == 4 && header[3] != "x"))
                throw ParseError(source, line_no, "header must be `id,z,y` or `id,z,y,x`");
            expected_fields = header.size();
            continue;
        }
        if (detail::blank(line))
            continue;
        const auto fields = detail::split(line);
        if (fields.size() != expected_fields)
            throw ParseError(source, line_no,
                             "expected " + std::to_string(expected_fields) + " fields, got "
                                 + std::to_string(fields.size()));
        const auto id = detail::parse_number<std::uint32_t>(fields[0]);
        const auto z = detail::parse_number<int>(fields[1]);
        const auto y = detail::parse_number<double>(fields[2]);
        if (!id)
            throw ParseError(source, line_no, "id must be a nonnegative integer");
        if (!z || (*z != 0 && *z != 1))
            throw ParseError(source, line_no, "z must be 0 or 1");
        if (!y || !std::isfinite(*y))
            throw ParseError(source, line_no, "y must be a finite number");
        NodeObservation obs{static_cast<std::uint8_t>(*z), *y, 0};
        if (expected_fields == 4) {
            const auto x = detail::parse_number<std::uint32_t>(fields[3]);
            if (!x)
                throw ParseError(source, line_no, "x must be a nonnegative integer stratum id");
            obs.x = *x;
        }
        if (*id >= rows.size())
            rows.resize(*id + 1);
        if (rows[*id])
            throw ParseError(source, line_no, "duplicate id " + std::to_string(*id));
        rows[*id] = obs;
    }
    if (line_no == 0)
        throw ParseError(source, 1, "missing header");
    std::vector<NodeObservation> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i])
            throw InputError(source + ": node ids are not contiguous, id " + std::to_string(i) + " is missing");
        out.push_back(*rows[i]);
    }
    return out;
}

//! Per-node values with header `id,e`, used for supplied propensities.
inline std::vector<double> read_node_values(std::istream& in, std::size_t n, const std::string& source = "values")
{
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::optional<double>> values(n);
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || detail::blank(line))
            continue;
        const auto fields = detail::split(line);
        if (fields.size() != 2)
            throw ParseError(source, line_no, "expected 2 fields `id,value`");
        const auto id = detail::parse_number<std::uint32_t>(fields[0]);
        const auto v = detail::parse_number<double>(fields[1]);
        if (!id || *id >= n)
            throw ParseError(source, line_no, "id out of range");
        if (!v || !std::isfinite(*v))
            throw ParseError(source, line_no, "value must be a finite number");
        values[*id] = *v;
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!values[i])
            throw InputError(source + ": missing value for id " + std::to_string(i));
        out[i] = *values[i];
    }
    return out;
}

inline void write_edge_list(std::ostream& out, const Graph& g)
{
    out << "u,v\n";
    for (const auto& [u, v] : g.edges())
        out << u << ',' << v << '\n';
}

inline void write_node_table(std::ostream& out, std::span<const NodeObservation> obs)
{
    out << "id,z,y,x\n";
    char buf[64];
    for (std::size_t i = 0; i < obs.size(); ++i) {
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, obs[i].y);
        out << i << ',' << int(obs[i].z) << ',' << std::string_view(buf, end - buf) << ',' << obs[i].x << '\n';
    }
}

} // namespace nethop::csv
