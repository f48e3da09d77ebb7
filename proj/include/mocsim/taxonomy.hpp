#ifndef MOCSIM_TAXONOMY_H
#define MOCSIM_TAXONOMY_H

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mocsim {

/*
 * Semantic domain taxonomy.
 *
 * A domain is a path of attribute values ordered by schema dimension, e.g.
 * ["street", "rainy", "night"] for dimensions (location, weather, time).
 * Domains form a prefix tree: the root is the empty path, a node at layer L
 * fixes the first L attributes, and leaves fix every dimension.  Each node
 * can carry a trained model (flag + version).
 */

struct SemanticPath {
    std::vector<std::string> values;

    SemanticPath() = default;
    SemanticPath(std::initializer_list<std::string> v) : values(v) {}
    explicit SemanticPath(std::vector<std::string> v) : values(std::move(v)) {}

    size_t layer() const { return values.size(); }
    bool is_root() const { return values.empty(); }

    // true when this path is an ancestor of (or equal to) other
    bool is_prefix_of(const SemanticPath& other) const {
        if (values.size() > other.values.size()) return false;
        for (size_t i = 0; i < values.size(); ++i)
            if (values[i] != other.values[i]) return false;
        return true;
    }

    SemanticPath parent() const {
        SemanticPath p = *this;
        if (!p.values.empty()) p.values.pop_back();
        return p;
    }

    SemanticPath child(const std::string& value) const {
        SemanticPath p = *this;
        p.values.push_back(value);
        return p;
    }

    // number of leading attributes shared with other
    size_t shared_prefix_len(const SemanticPath& other) const {
        size_t n = 0;
        while (n < values.size() && n < other.values.size() && values[n] == other.values[n]) ++n;
        return n;
    }

    std::string to_string() const; // "street/rainy/night", root is "/"
    static SemanticPath from_string(const std::string& s);

    bool operator==(const SemanticPath& o) const { return values == o.values; }
    bool operator!=(const SemanticPath& o) const { return values != o.values; }
    bool operator<(const SemanticPath& o) const { return values < o.values; }
};

// Hop distance between two paths in the prefix tree: number of parent-child
// edges on the unique connecting path.  Ancestor pairs are the layer gap;
// everything else goes through the lowest common ancestor.
size_t path_distance(const SemanticPath& a, const SemanticPath& b);

// One schema dimension.  An empty value list means the dimension is open
// (any string allowed); otherwise inserts are checked against the list.
struct SchemaDimension {
    std::string name;
    std::vector<std::string> values;
};

struct TaxonomySchema {
    std::vector<SchemaDimension> dimensions;
    size_t depth() const { return dimensions.size(); }
};

struct TaxonomyNode {
    bool model_present = false;
    uint32_t model_version = 0;
    std::set<std::string> children; // child attribute values in sorted order
};

struct RankedCandidate {
    SemanticPath path;
    size_t distance = 0;
    size_t shared_prefix = 0;
    uint32_t model_version = 0;
};

class TaxonomyTree {
public:
    TaxonomyTree() { nodes_[SemanticPath{}] = TaxonomyNode{}; }
    explicit TaxonomyTree(TaxonomySchema schema) : schema_(std::move(schema)) {
        nodes_[SemanticPath{}] = TaxonomyNode{};
    }

    // Insert a domain path, creating any missing ancestors.  Returns true if
    // anything was added.  Bumps the revision on change.
    bool insert_domain(const SemanticPath& path);

    // Flag a node as carrying a trained model with the given version.
    // The node must exist.  Bumps the revision.
    void set_model(const SemanticPath& path, uint32_t version);

    bool contains(const SemanticPath& path) const { return nodes_.count(path) != 0; }
    bool model_present(const SemanticPath& path) const;
    uint32_t model_version(const SemanticPath& path) const;
    bool is_leaf_path(const SemanticPath& path) const { return path.layer() == schema_.depth(); }

    // lowest common ancestor; both paths must be present
    SemanticPath lca(const SemanticPath& a, const SemanticPath& b) const;

    // hop distance; both paths must be present
    size_t distance(const SemanticPath& a, const SemanticPath& b) const;

    /*
     * Rank candidate nodes by suitability for serving `target`:
     *   1. ascending hop distance to target
     *   2. longer shared prefix with target first
     *   3. higher model version first
     *   4. lexicographically smaller path first
     * Target and every candidate must be present in the tree.
     */
    std::vector<RankedCandidate> rank_candidates(const SemanticPath& target,
                                                 const std::vector<SemanticPath>& candidates) const;

    // all nodes flagged model-present, sorted by path
    std::vector<SemanticPath> model_present_nodes() const;
    std::vector<SemanticPath> leaf_nodes() const;
    std::vector<SemanticPath> all_nodes() const;

    const TaxonomyNode& node(const SemanticPath& path) const;
    const TaxonomySchema& schema() const { return schema_; }
    uint32_t revision() const { return revision_; }
    size_t node_count() const { return nodes_.size(); }

    bool operator==(const TaxonomyTree& o) const {
        return revision_ == o.revision_ && nodes_ == o.nodes_;
    }

    /*
     * Binary table form, used verbatim as the TaxonomySync payload:
     *   u32 revision
     *   u16 entry count
     *   per entry (sorted by path):
     *     u8   path length
     *     per value: u16 byte length + UTF-8 bytes
     *     u32  model version
     *     u8   flags (bit0 = model present)
     * All integers big-endian.
     */
    std::vector<uint8_t> encode_table() const;
    static TaxonomyTree decode_table(const std::vector<uint8_t>& bytes,
                                     const TaxonomySchema& schema);

private:
    TaxonomyNode& node_mut(const SemanticPath& path);
    void check_against_schema(const SemanticPath& path) const;

    TaxonomySchema schema_;
    std::map<SemanticPath, TaxonomyNode> nodes_; // sorted => canonical encode order
    uint32_t revision_ = 0;
};

inline bool operator==(const TaxonomyNode& a, const TaxonomyNode& b) {
    return a.model_present == b.model_present && a.model_version == b.model_version &&
           a.children == b.children;
}

} // namespace mocsim

#endif // MOCSIM_TAXONOMY_H
