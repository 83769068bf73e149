#pragma once

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/corpus.h"

namespace corpusforge {

struct TreeNode {
  std::string node_id;
  std::optional<std::string> parent_id;
  Role role = Role::kHuman;
  std::string text;
  std::string lang;
};

struct ConversationTree {
  std::string tree_id;
  std::vector<TreeNode> nodes;
  std::size_t pruned_nodes = 0;  // nodes dropped by the language filter
};

// Checks unique node ids, a single prompter root, resolvable parents and
// reachability of every node from the root. Throws MalformedTree.
void validate_tree(const ConversationTree& tree);

// Keeps the nodes reachable from the root through nodes whose lang equals
// `lang` (case-insensitive). nullopt when the root itself does not match.
std::optional<ConversationTree> prune_to_language(const ConversationTree& tree,
                                                  std::string_view lang);

// Decodes {"trees": [...]} (OASST tree-export layout), validates each tree,
// and applies the language filter; an empty filter keeps everything.
std::vector<ConversationTree> parse_trees(const nlohmann::json& document,
                                          std::string_view lang_filter);

std::vector<ConversationTree> load_trees(const std::filesystem::path& path,
                                         std::string_view lang_filter);

std::size_t count_leaves(const ConversationTree& tree);

// One Conversation (origin=oasst) per root-to-leaf path. Trees are visited
// in tree_id order and children in node_id order, depth-first. Message texts
// are copied verbatim; message ids are "<conversation id>/<node_id>".
std::vector<Conversation> extract_seeds(const std::vector<ConversationTree>& trees);

}  // namespace corpusforge
