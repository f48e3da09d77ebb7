#include "mocsim/taxonomy.hpp"

#include <algorithm>
#include <stdexcept>

#include "mocsim/bytes.hpp"

namespace mocsim {

std::string SemanticPath::to_string() const {
    if (values.empty()) return "/";
    std::string out;
    for (const auto& v : values) {
        out += '/';
        out += v;
    }
    return out;
}

SemanticPath SemanticPath::from_string(const std::string& s) {
    SemanticPath p;
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '/') {
            ++i;
            continue;
        }
        size_t j = s.find('/', i);
        if (j == std::string::npos) j = s.size();
        p.values.push_back(s.substr(i, j - i));
        i = j;
    }
    return p;
}

size_t path_distance(const SemanticPath& a, const SemanticPath& b) {
    const size_t shared = a.shared_prefix_len(b);
    if (shared == a.layer() || shared == b.layer()) {
        // ancestor relation (or equal): distance is the layer gap
        return a.layer() > b.layer() ? a.layer() - b.layer() : b.layer() - a.layer();
    }
    // otherwise go through the lowest common ancestor
    return (a.layer() - shared) + (b.layer() - shared);
}

bool TaxonomyTree::insert_domain(const SemanticPath& path) {
    check_against_schema(path);
    bool changed = false;
    SemanticPath cur; // root
    for (size_t i = 0; i < path.layer(); ++i) {
        const std::string& value = path.values[i];
        TaxonomyNode& parent = nodes_[cur];
        if (parent.children.insert(value).second) changed = true;
        cur = cur.child(value);
        if (nodes_.emplace(cur, TaxonomyNode{}).second) changed = true;
    }
    if (changed) ++revision_;
    return changed;
}

void TaxonomyTree::set_model(const SemanticPath& path, uint32_t version) {
    TaxonomyNode& n = node_mut(path);
    n.model_present = true;
    n.model_version = version;
    ++revision_;
}

bool TaxonomyTree::model_present(const SemanticPath& path) const {
    auto it = nodes_.find(path);
    return it != nodes_.end() && it->second.model_present;
}

uint32_t TaxonomyTree::model_version(const SemanticPath& path) const {
    return node(path).model_version;
}

SemanticPath TaxonomyTree::lca(const SemanticPath& a, const SemanticPath& b) const {
    node(a);
    node(b);
    const size_t shared = a.shared_prefix_len(b);
    SemanticPath c;
    c.values.assign(a.values.begin(), a.values.begin() + static_cast<long>(shared));
    return c;
}

size_t TaxonomyTree::distance(const SemanticPath& a, const SemanticPath& b) const {
    node(a);
    node(b);
    return path_distance(a, b);
}

std::vector<RankedCandidate> TaxonomyTree::rank_candidates(
    const SemanticPath& target, const std::vector<SemanticPath>& candidates) const {
    node(target);
    std::vector<RankedCandidate> ranked;
    ranked.reserve(candidates.size());
    for (const auto& c : candidates) {
        RankedCandidate r;
        r.path = c;
        r.distance = distance(target, c);
        r.shared_prefix = target.shared_prefix_len(c);
        r.model_version = node(c).model_version;
        ranked.push_back(std::move(r));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedCandidate& x, const RankedCandidate& y) {
                         if (x.distance != y.distance) return x.distance < y.distance;
                         if (x.shared_prefix != y.shared_prefix)
                             return x.shared_prefix > y.shared_prefix;
                         if (x.model_version != y.model_version)
                             return x.model_version > y.model_version;
                         return x.path < y.path;
                     });
    return ranked;
}

std::vector<SemanticPath> TaxonomyTree::model_present_nodes() const {
    std::vector<SemanticPath> out;
    for (const auto& [path, n] : nodes_)
        if (n.model_present) out.push_back(path);
    return out;
}

std::vector<SemanticPath> TaxonomyTree::leaf_nodes() const {
    std::vector<SemanticPath> out;
    for (const auto& [path, n] : nodes_)
        if (path.layer() == schema_.depth()) out.push_back(path);
    return out;
}

std::vector<SemanticPath> TaxonomyTree::all_nodes() const {
    std::vector<SemanticPath> out;
    out.reserve(nodes_.size());
    for (const auto& [path, n] : nodes_) out.push_back(path);
    return out;
}

const TaxonomyNode& TaxonomyTree::node(const SemanticPath& path) const {
    auto it = nodes_.find(path);
    if (it == nodes_.end())
        throw std::out_of_range("taxonomy node not found: " + path.to_string());
    return it->second;
}

TaxonomyNode& TaxonomyTree::node_mut(const SemanticPath& path) {
    auto it = nodes_.find(path);
    if (it == nodes_.end())
        throw std::out_of_range("taxonomy node not found: " + path.to_string());
    return it->second;
}

void TaxonomyTree::check_against_schema(const SemanticPath& path) const {
    if (schema_.depth() != 0 && path.layer() > schema_.depth())
        throw std::invalid_argument("path deeper than schema: " + path.to_string());
    for (size_t i = 0; i < path.layer(); ++i) {
        if (path.values[i].empty())
            throw std::invalid_argument("empty attribute value in path");
        if (schema_.depth() == 0) continue;
        const auto& allowed = schema_.dimensions[i].values;
        if (!allowed.empty() &&
            std::find(allowed.begin(), allowed.end(), path.values[i]) == allowed.end())
            throw std::invalid_argument("value '" + path.values[i] +
                                        "' not allowed for dimension " +
                                        schema_.dimensions[i].name);
    }
}

std::vector<uint8_t> TaxonomyTree::encode_table() const {
    if (nodes_.size() > UINT16_MAX) throw std::length_error("taxonomy too large for table form");
    ByteWriter w;
    w.put_u32(revision_);
    w.put_u16(static_cast<uint16_t>(nodes_.size()));
    for (const auto& [path, n] : nodes_) { // std::map => sorted, canonical bytes
        if (path.layer() > UINT8_MAX) throw std::length_error("path too deep for table form");
        w.put_u8(static_cast<uint8_t>(path.layer()));
        for (const auto& v : path.values) w.put_string(v);
        w.put_u32(n.model_version);
        w.put_u8(n.model_present ? 0x01 : 0x00);
    }
    return w.take();
}

TaxonomyTree TaxonomyTree::decode_table(const std::vector<uint8_t>& bytes,
                                        const TaxonomySchema& schema) {
    ByteReader r(bytes);
    TaxonomyTree tree(schema);
    const uint32_t revision = r.get_u32();
    const uint16_t count = r.get_u16();
    for (uint16_t i = 0; i < count; ++i) {
        const size_t entry_at = r.pos();
        const uint8_t depth = r.get_u8();
        SemanticPath path;
        for (uint8_t d = 0; d < depth; ++d) path.values.push_back(r.get_string());
        const uint32_t version = r.get_u32();
        const uint8_t flags = r.get_u8();
        if (flags > 0x01) throw decode_error(entry_at, "unknown taxonomy entry flags");
        tree.insert_domain(path);
        TaxonomyNode& n = tree.node_mut(path);
        n.model_present = (flags & 0x01) != 0;
        n.model_version = version;
    }
    if (!r.at_end()) throw decode_error(r.pos(), "trailing bytes after taxonomy table");
    tree.revision_ = revision;
    return tree;
}

} // namespace mocsim
