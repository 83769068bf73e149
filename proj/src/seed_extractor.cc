#include "corpusforge/seed_extractor.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>

#include "corpusforge/corpus_io.h"
#include "corpusforge/errors.h"

namespace corpusforge {
namespace {

bool same_language(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) ==
           std::tolower(static_cast<unsigned char>(y));
  });
}

// node index -> child indices sorted by node_id
std::vector<std::vector<std::size_t>> children_of(const ConversationTree& tree,
                                                  std::size_t* root) {
  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) index[tree.nodes[i].node_id] = i;

  std::vector<std::vector<std::size_t>> children(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& parent = tree.nodes[i].parent_id;
    if (!parent) {
      *root = i;
      continue;
    }
    children[index.at(*parent)].push_back(i);
  }
  for (auto& c : children) {
    std::sort(c.begin(), c.end(), [&](std::size_t a, std::size_t b) {
      return tree.nodes[a].node_id < tree.nodes[b].node_id;
    });
  }
  return children;
}

TreeNode node_from_json(const nlohmann::json& j, const std::string& tree_id) {
  try {
    TreeNode node;
    node.node_id = j.at("node_id").get<std::string>();
    const auto& parent = j.at("parent_id");
    if (!parent.is_null()) node.parent_id = parent.get<std::string>();
    const auto role = j.at("role").get<std::string>();
    if (role == "prompter") {
      node.role = Role::kHuman;
    } else if (role == "assistant") {
      node.role = Role::kAssistant;
    } else {
      throw MalformedTree(tree_id, "unknown role \"" + role + "\"");
    }
    node.text = j.at("text").get<std::string>();
    node.lang = j.at("lang").get<std::string>();
    return node;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedTree(tree_id, std::string("bad node: ") + e.what());
  }
}

}  // namespace

void validate_tree(const ConversationTree& tree) {
  if (tree.nodes.empty()) throw MalformedTree(tree.tree_id, "tree has no nodes");
  std::set<std::string_view> ids;
  std::size_t roots = 0;
  for (const auto& node : tree.nodes) {
    if (!ids.insert(node.node_id).second) {
      throw MalformedTree(tree.tree_id, "duplicate node id " + node.node_id);
    }
    if (!node.parent_id) ++roots;
  }
  if (roots == 0) throw MalformedTree(tree.tree_id, "no root node");
  if (roots > 1) throw MalformedTree(tree.tree_id, "multiple roots");
  for (const auto& node : tree.nodes) {
    if (node.parent_id && !ids.count(*node.parent_id)) {
      throw MalformedTree(tree.tree_id, "node " + node.node_id + " has dangling parent " +
                                            *node.parent_id);
    }
  }

  std::size_t root = 0;
  const auto children = children_of(tree, &root);
  if (tree.nodes[root].role != Role::kHuman) {
    throw MalformedTree(tree.tree_id, "root must be a prompter message");
  }
  std::size_t reached = 0;
  std::vector<std::size_t> stack = {root};
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    ++reached;
    stack.insert(stack.end(), children[i].begin(), children[i].end());
  }
  if (reached != tree.nodes.size()) {
    throw MalformedTree(tree.tree_id, "cycle: some nodes are unreachable from the root");
  }
}

std::optional<ConversationTree> prune_to_language(const ConversationTree& tree,
                                                  std::string_view lang) {
  std::size_t root = 0;
  const auto children = children_of(tree, &root);
  if (!same_language(tree.nodes[root].lang, lang)) return std::nullopt;

  ConversationTree pruned;
  pruned.tree_id = tree.tree_id;
  std::vector<std::size_t> stack = {root};
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    pruned.nodes.push_back(tree.nodes[i]);
    for (std::size_t c : children[i]) {
      if (same_language(tree.nodes[c].lang, lang)) stack.push_back(c);
    }
  }
  pruned.pruned_nodes = tree.pruned_nodes + (tree.nodes.size() - pruned.nodes.size());
  return pruned;
}

std::vector<ConversationTree> parse_trees(const nlohmann::json& document,
                                          std::string_view lang_filter) {
  if (!document.is_object() || !document.contains("trees") || !document["trees"].is_array()) {
    throw DataError("tree export must be {\"trees\": [...]}");
  }
  std::vector<ConversationTree> trees;
  for (const auto& t : document["trees"]) {
    ConversationTree tree;
    if (!t.is_object() || !t.contains("tree_id") || !t["tree_id"].is_string()) {
      throw MalformedTree("<unknown>", "missing tree_id");
    }
    tree.tree_id = t["tree_id"].get<std::string>();
    if (!t.contains("nodes") || !t["nodes"].is_array()) {
      throw MalformedTree(tree.tree_id, "missing nodes array");
    }
    for (const auto& n : t["nodes"]) tree.nodes.push_back(node_from_json(n, tree.tree_id));
    validate_tree(tree);

    if (lang_filter.empty()) {
      trees.push_back(std::move(tree));
    } else if (auto pruned = prune_to_language(tree, lang_filter)) {
      trees.push_back(std::move(*pruned));
    }
  }
  return trees;
}

std::vector<ConversationTree> load_trees(const std::filesystem::path& path,
                                         std::string_view lang_filter) {
  const auto document = nlohmann::json::parse(read_file(path), nullptr, false);
  if (document.is_discarded()) throw FileError(path.string(), "invalid JSON");
  return parse_trees(document, lang_filter);
}

std::size_t count_leaves(const ConversationTree& tree) {
  std::set<std::string_view> parents;
  for (const auto& node : tree.nodes) {
    if (node.parent_id) parents.insert(*node.parent_id);
  }
  return static_cast<std::size_t>(std::count_if(
      tree.nodes.begin(), tree.nodes.end(),
      [&](const TreeNode& node) { return !parents.count(node.node_id); }));
}

std::vector<Conversation> extract_seeds(const std::vector<ConversationTree>& trees) {
  std::vector<const ConversationTree*> ordered;
  for (const auto& tree : trees) ordered.push_back(&tree);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->tree_id < b->tree_id; });

  std::vector<Conversation> seeds;
  for (const ConversationTree* tree : ordered) {
    std::size_t root = 0;
    const auto children = children_of(*tree, &root);

    // Depth-first with an explicit stack of (node, next child) frames; the
    // frames from the root to the top form the current path.
    std::vector<std::pair<std::size_t, std::size_t>> path = {{root, 0}};
    while (!path.empty()) {
      auto& [node, next_child] = path.back();
      if (children[node].empty()) {
        Conversation seed;
        const auto& leaf = tree->nodes[node];
        seed.id = "oasst-" + tree->tree_id + "-" + leaf.node_id;
        seed.origin = Origin::kOasst;
        seed.provenance["tree_id"] = tree->tree_id;
        seed.provenance["leaf_node_id"] = leaf.node_id;
        if (tree->pruned_nodes > 0) {
          seed.provenance["pruned_nodes"] = std::to_string(tree->pruned_nodes);
        }
        for (const auto& [index, unused] : path) {
          const auto& source = tree->nodes[index];
          Message message;
          message.id = seed.id + "/" + source.node_id;
          message.role = source.role;
          message.text = source.text;
          seed.messages.push_back(std::move(message));
        }
        seeds.push_back(std::move(seed));
        path.pop_back();
        continue;
      }
      if (next_child == children[node].size()) {
        path.pop_back();
        continue;
      }
      const std::size_t child = children[node][next_child++];
      path.emplace_back(child, 0);
    }
  }
  return seeds;
}

}  // namespace corpusforge
