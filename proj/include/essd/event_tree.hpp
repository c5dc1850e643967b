#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "essd/csv.hpp"
#include "essd/error.hpp"

namespace essd {

// Index into EventCodeTree::nodes.
using EventNodeId = std::int32_t;
inline constexpr EventNodeId kNoNode = -1;

struct EventNode {
  std::string code;
  EventNodeId parent = kNoNode;
  std::int32_t depth = 0;  // root = 1
  std::string description;
};

// Clinical event code hierarchy. Codes are dotted paths ("E2.1.4"); the
// depth of a code equals its component count. Records always carry leaf or
// interior codes present in the tree; mapping a code to a shallower depth
// walks parent links.
class EventCodeTree {
 public:
  std::vector<EventNode> nodes;

  EventNodeId find(const std::string& code) const {
    auto it = index_.find(code);
    return it == index_.end() ? kNoNode : it->second;
  }

  EventNodeId require(const std::string& code) const {
    EventNodeId id = find(code);
    if (id == kNoNode)
      throw Error(Errc::UnknownCode, "event code '" + code + "'");
    return id;
  }

  // Ancestor of `id` at `depth`, or `id` itself when already at or above.
  EventNodeId ancestor_at_depth(EventNodeId id, std::int32_t depth) const {
    while (nodes[id].depth > depth) id = nodes[id].parent;
    return id;
  }

  std::vector<EventNodeId> children_of(EventNodeId id) const {
    std::vector<EventNodeId> out;
    for (EventNodeId i = 0; i < static_cast<EventNodeId>(nodes.size()); ++i)
      if (nodes[i].parent == id) out.push_back(i);
    return out;
  }

  EventNodeId add_node(std::string code, EventNodeId parent,
                       std::string description) {
    if (index_.count(code))
      throw Error(Errc::IntegrityError, "duplicate event code '" + code + "'");
    EventNode node;
    node.code = std::move(code);
    node.parent = parent;
    node.depth = parent == kNoNode ? 1 : nodes[parent].depth + 1;
    node.description = std::move(description);
    nodes.push_back(std::move(node));
    EventNodeId id = static_cast<EventNodeId>(nodes.size()) - 1;
    index_[nodes[id].code] = id;
    return id;
  }

 private:
  std::unordered_map<std::string, EventNodeId> index_;
};

// event_tree.csv: event_code,parent_code,depth,description. Parents must
// appear before children; depth-1 roots leave parent_code empty. The depth
// column is redundant with the parent chain and is checked against it.
inline EventCodeTree read_event_tree_csv(const std::string& path) {
  CsvTable table = read_csv_file(path, 4);
  EventCodeTree tree;
  for (const auto& row : table.rows) {
    const std::string& code = row[0];
    const std::string& parent_code = row[1];
    if (code.empty()) throw Error(Errc::MalformedRow, path + ": empty code");
    EventNodeId parent = kNoNode;
    if (!parent_code.empty()) {
      parent = tree.find(parent_code);
      if (parent == kNoNode)
        throw Error(Errc::IntegrityError,
                    path + ": parent '" + parent_code + "' of '" + code +
                        "' not defined before use");
    }
    EventNodeId id = tree.add_node(code, parent, row[3]);
    std::int32_t declared = 0;
    auto [ptr, ec] =
        std::from_chars(row[2].data(), row[2].data() + row[2].size(), declared);
    if (ec != std::errc() || ptr != row[2].data() + row[2].size())
      throw Error(Errc::MalformedRow,
                  path + ": bad depth '" + row[2] + "' for '" + code + "'");
    if (declared != tree.nodes[id].depth)
      throw Error(Errc::IntegrityError,
                  path + ": '" + code + "' declares depth " + row[2] +
                      " but parent chain gives " +
                      std::to_string(tree.nodes[id].depth));
    if (declared < 1 || declared > 5)
      throw Error(Errc::IntegrityError,
                  path + ": '" + code + "' depth out of range");
  }
  if (tree.nodes.empty()) throw Error(Errc::EmptyDataset, path + ": no codes");
  return tree;
}

inline void write_event_tree_csv(const EventCodeTree& tree,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path);
  out << "event_code,parent_code,depth,description\n";
  for (const auto& node : tree.nodes) {
    std::string parent =
        node.parent == kNoNode ? "" : tree.nodes[node.parent].code;
    out << join_csv({node.code, parent, std::to_string(node.depth),
                     node.description})
        << "\n";
  }
}

}  // namespace essd
