#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tidm/canonical.hpp"
#include "tidm/error.hpp"
#include "tidm/field.hpp"
#include "tidm/json_util.hpp"
#include "tidm/shamir.hpp"

namespace tidm {

struct AttributeId {
  std::string ns;
  std::string name;

  std::string canonical() const { return ns + "/" + name; }

  static AttributeId parse(std::string_view text) {
    auto slash = text.find('/');
    require(slash != std::string_view::npos && slash > 0 && slash + 1 < text.size(),
            Err::ParseError, "attribute must be namespace/name");
    return {std::string(text.substr(0, slash)), std::string(text.substr(slash + 1))};
  }

  bool operator==(const AttributeId&) const = default;
  auto operator<=>(const AttributeId&) const = default;
};

struct EvaluationContext {
  i64 now_epoch = 0;
  std::string location;
};

// Policy tree over attribute, time-window and location leaves. AND and OR are
// stored as their threshold equivalents (m = fan-out, m = 1).
class AccessTree {
public:
  struct Node {
    enum class Kind { Attribute, Time, Location, Gate };
    Kind kind = Kind::Attribute;
    AttributeId attribute;
    i64 window_start = 0, window_end = 0;
    std::set<std::string> locations;
    std::size_t threshold = 0;
    std::vector<Node> children;
  };

  static AccessTree attribute(AttributeId id) {
    Node n;
    n.kind = Node::Kind::Attribute;
    n.attribute = std::move(id);
    return AccessTree(std::move(n));
  }

  static AccessTree attribute(std::string_view canonical_id) {
    return attribute(AttributeId::parse(canonical_id));
  }

  static AccessTree time_window(i64 start, i64 end) {
    require(start <= end, Err::InvalidConfig, "empty time window");
    Node n;
    n.kind = Node::Kind::Time;
    n.window_start = start;
    n.window_end = end;
    return AccessTree(std::move(n));
  }

  static AccessTree location(std::set<std::string> labels) {
    require(!labels.empty(), Err::InvalidConfig, "location set must be non-empty");
    Node n;
    n.kind = Node::Kind::Location;
    n.locations = std::move(labels);
    return AccessTree(std::move(n));
  }

  static AccessTree at_least(std::size_t m, std::vector<AccessTree> children) {
    require(!children.empty(), Err::InvalidConfig, "gate needs at least one child");
    require(m >= 1 && m <= children.size(), Err::ThresholdOutOfRange,
            "gate threshold out of range");
    Node n;
    n.kind = Node::Kind::Gate;
    n.threshold = m;
    for (auto& c : children) n.children.push_back(std::move(c.root_));
    return AccessTree(std::move(n));
  }

  static AccessTree all_of(std::vector<AccessTree> children) {
    auto m = children.size();
    return at_least(m, std::move(children));
  }

  static AccessTree any_of(std::vector<AccessTree> children) {
    return at_least(1, std::move(children));
  }

  const Node& root() const { return root_; }

  std::size_t leaf_count() const { return count_leaves(root_); }

  std::size_t max_fanout() const { return fanout(root_); }

  std::set<AttributeId> attribute_leaves() const {
    std::set<AttributeId> out;
    collect_attributes(root_, out);
    return out;
  }

  Canon to_canon() const { return node_to_canon(root_); }

  static AccessTree from_json(const Json& j) { return AccessTree(node_from_json(j)); }

  static AccessTree parse(std::string_view text) { return from_json(parse_json(text)); }

private:
  explicit AccessTree(Node root) : root_(std::move(root)) {}

  static std::size_t count_leaves(const Node& n) {
    if (n.kind != Node::Kind::Gate) return 1;
    std::size_t total = 0;
    for (const auto& c : n.children) total += count_leaves(c);
    return total;
  }

  static std::size_t fanout(const Node& n) {
    if (n.kind != Node::Kind::Gate) return 0;
    std::size_t best = n.children.size();
    for (const auto& c : n.children) best = std::max(best, fanout(c));
    return best;
  }

  static void collect_attributes(const Node& n, std::set<AttributeId>& out) {
    if (n.kind == Node::Kind::Attribute) out.insert(n.attribute);
    for (const auto& c : n.children) collect_attributes(c, out);
  }

  static Canon node_to_canon(const Node& n) {
    Canon::Object o;
    switch (n.kind) {
      case Node::Kind::Attribute:
        o.emplace("attr", Canon(n.attribute.canonical()));
        break;
      case Node::Kind::Time:
        o.emplace("time", Canon(Canon::Array{Canon(n.window_start), Canon(n.window_end)}));
        break;
      case Node::Kind::Location: {
        Canon::Array labels;
        for (const auto& l : n.locations) labels.push_back(Canon(l));
        o.emplace("loc", Canon(std::move(labels)));
        break;
      }
      case Node::Kind::Gate: {
        o.emplace("thresh", Canon(static_cast<u64>(n.threshold)));
        Canon::Array children;
        for (const auto& c : n.children) children.push_back(node_to_canon(c));
        o.emplace("children", Canon(std::move(children)));
        break;
      }
    }
    return Canon(std::move(o));
  }

  static Node node_from_json(const Json& j) {
    require(j.is_object(), Err::ParseError, "tree node must be an object");
    if (j.contains("attr")) {
      Node n;
      n.kind = Node::Kind::Attribute;
      n.attribute = AttributeId::parse(j.at("attr").get<std::string>());
      return n;
    }
    if (j.contains("time")) {
      const auto& w = j.at("time");
      require(w.is_array() && w.size() == 2, Err::ParseError, "time window must be [start, end]");
      Node n;
      n.kind = Node::Kind::Time;
      n.window_start = get_i64(w.at(0));
      n.window_end = get_i64(w.at(1));
      require(n.window_start <= n.window_end, Err::ParseError, "empty time window");
      return n;
    }
    if (j.contains("loc")) {
      Node n;
      n.kind = Node::Kind::Location;
      for (const auto& l : j.at("loc")) n.locations.insert(l.get<std::string>());
      require(!n.locations.empty(), Err::ParseError, "location set must be non-empty");
      return n;
    }
    if (j.contains("thresh")) {
      Node n;
      n.kind = Node::Kind::Gate;
      n.threshold = get_u64(j.at("thresh"));
      for (const auto& c : j.at("children")) n.children.push_back(node_from_json(c));
      require(!n.children.empty(), Err::ParseError, "gate needs at least one child");
      require(n.threshold >= 1 && n.threshold <= n.children.size(), Err::ParseError,
              "gate threshold out of range");
      return n;
    }
    fail(Err::ParseError, "unknown tree node shape");
  }

  Node root_;
};

inline bool leaf_satisfied(const AccessTree::Node& n, const std::set<AttributeId>& attrs,
                           const EvaluationContext& ctx) {
  switch (n.kind) {
    case AccessTree::Node::Kind::Attribute:
      return attrs.contains(n.attribute);
    case AccessTree::Node::Kind::Time:
      return ctx.now_epoch >= n.window_start && ctx.now_epoch <= n.window_end;
    case AccessTree::Node::Kind::Location:
      return n.locations.contains(ctx.location);
    case AccessTree::Node::Kind::Gate:
      break;
  }
  return false;
}

namespace detail {

inline bool node_satisfies(const AccessTree::Node& n, const std::set<AttributeId>& attrs,
                           const EvaluationContext& ctx) {
  if (n.kind != AccessTree::Node::Kind::Gate) return leaf_satisfied(n, attrs, ctx);
  std::size_t hits = 0;
  for (const auto& c : n.children) {
    if (node_satisfies(c, attrs, ctx)) ++hits;
  }
  return hits >= n.threshold;
}

}  // namespace detail

inline bool satisfies(const AccessTree& tree, const std::set<AttributeId>& attrs,
                      const EvaluationContext& ctx) {
  return detail::node_satisfies(tree.root(), attrs, ctx);
}

// Leaves are addressed by preorder ordinal (0-based, left to right).
using LeafShareMap = std::map<std::size_t, SharePoint>;

namespace detail {

inline void distribute_node(const AccessTree::Node& n, SharePoint assigned,
                            const PrimeField& field, RandomSource& rng, std::size_t& ordinal,
                            LeafShareMap& out) {
  if (n.kind != AccessTree::Node::Kind::Gate) {
    out.emplace(ordinal++, assigned);
    return;
  }
  if (n.threshold == 1) {
    // OR gate: every child carries the gate's own share unchanged, so
    // duplicates collapse under hashing at reconstruction time.
    for (const auto& c : n.children) distribute_node(c, assigned, field, rng, ordinal, out);
    return;
  }
  auto shares = shamir_share(assigned.value, n.threshold, n.children.size(), field, rng);
  for (std::size_t j = 0; j < n.children.size(); ++j) {
    distribute_node(n.children[j], shares.points[j], field, rng, ordinal, out);
  }
}

inline std::optional<SharePoint> recover_node(const AccessTree::Node& n, std::size_t my_index,
                                              const LeafShareMap& shares,
                                              const EvaluationContext& ctx, const PrimeField& field,
                                              std::size_t& ordinal) {
  if (n.kind != AccessTree::Node::Kind::Gate) {
    std::size_t ord = ordinal++;
    auto it = shares.find(ord);
    if (it == shares.end()) return std::nullopt;
    if (n.kind != AccessTree::Node::Kind::Attribute && !leaf_satisfied(n, {}, ctx)) {
      return std::nullopt;
    }
    return it->second;
  }
  std::vector<SharePoint> recovered;
  for (std::size_t j = 0; j < n.children.size(); ++j) {
    auto r = recover_node(n.children[j], j + 1, shares, ctx, field, ordinal);
    if (r) recovered.push_back(*r);
  }
  auto distinct = dedup_shares(recovered, field.modulus());
  if (n.threshold == 1) {
    // OR: pass the first available child's share upward unchanged.
    if (distinct.empty()) return std::nullopt;
    return distinct.front();
  }
  if (distinct.size() < n.threshold) return std::nullopt;
  std::sort(distinct.begin(), distinct.end(),
            [](const SharePoint& a, const SharePoint& b) { return a.index < b.index; });
  distinct.resize(n.threshold);
  return SharePoint{static_cast<u64>(my_index), lagrange_at_zero(distinct, field)};
}

}  // namespace detail

// Top-down sharing of the root secret over the tree: THRESH(m) gates share
// m-of-c to their children (child j gets index j), OR gates pass the share
// through, leaves keep their final point.
inline LeafShareMap distribute_tree_shares(const AccessTree& tree, u64 root_secret,
                                           const PrimeField& field, RandomSource& rng) {
  require(tree.max_fanout() < field.modulus(), Err::FieldTooSmall,
          "field modulus does not exceed the gate fan-out");
  require(root_secret < field.modulus(), Err::SecretOutOfField, "secret exceeds field modulus");
  LeafShareMap out;
  std::size_t ordinal = 0;
  detail::distribute_node(tree.root(), SharePoint{1, root_secret}, field, rng, ordinal, out);
  return out;
}

// Bottom-up recovery: a leaf contributes its share iff its predicate holds
// under ctx, OR picks the first distinct child share, THRESH(m) interpolates
// the m smallest-index children. Throws Unsatisfied when the root secret is
// unreachable.
inline u64 reconstruct_from_leaves(const AccessTree& tree, const LeafShareMap& available,
                                   const EvaluationContext& ctx, const PrimeField& field) {
  std::size_t ordinal = 0;
  auto r = detail::recover_node(tree.root(), 1, available, ctx, field, ordinal);
  require(r.has_value(), Err::Unsatisfied, "access structure not satisfied");
  return r->value;
}

}  // namespace tidm
