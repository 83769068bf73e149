#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <random>

#include "corpusforge/errors.h"
#include "corpusforge/seed_extractor.h"

namespace corpusforge {
namespace {

const std::filesystem::path kData = CORPUSFORGE_TEST_DATA;

TreeNode node(std::string id, std::optional<std::string> parent, Role role,
              std::string lang = "it") {
  return {id, std::move(parent), role, "testo " + id, std::move(lang)};
}

TEST(SeedExtractor, FixtureFiltersItalianAndCopiesVerbatim) {
  const auto trees = load_trees(kData / "oasst_trees.json", "it");
  ASSERT_EQ(trees.size(), 2u);
  const auto seeds = extract_seeds(trees);
  ASSERT_EQ(seeds.size(), 3u);

  EXPECT_EQ(seeds[0].id, "oasst-t1-n3");
  EXPECT_EQ(seeds[0].origin, Origin::kOasst);
  ASSERT_EQ(seeds[0].messages.size(), 3u);
  EXPECT_EQ(seeds[0].messages[0].role, Role::kHuman);
  EXPECT_EQ(seeds[0].messages[1].role, Role::kAssistant);
  EXPECT_EQ(seeds[0].messages[1].id, "oasst-t1-n3/n1");
  EXPECT_EQ(seeds[0].messages[2].text, "Quale brodo?");
  EXPECT_EQ(seeds[0].provenance.at("pruned_nodes"), "2");
  EXPECT_EQ(seeds[1].id, "oasst-t1-n4");

  EXPECT_EQ(seeds[2].id, "oasst-t2-r");
  EXPECT_EQ(seeds[2].messages[0].text, "  Spazi  conservati  ");
  EXPECT_EQ(seeds[2].provenance.count("pruned_nodes"), 0u);
}

TEST(SeedExtractor, EmptyFilterKeepsEveryTree) {
  const auto trees = load_trees(kData / "oasst_trees.json", "");
  ASSERT_EQ(trees.size(), 3u);
  EXPECT_EQ(extract_seeds(trees).size(), 3u + 1u + 1u);
}

TEST(SeedExtractor, MalformedTreesAreRejected) {
  ConversationTree tree{"bad", {node("a", std::nullopt, Role::kHuman),
                                node("a", std::string("a"), Role::kAssistant)}};
  EXPECT_THROW(validate_tree(tree), MalformedTree);

  tree.nodes = {node("a", std::nullopt, Role::kHuman), node("b", std::nullopt, Role::kHuman)};
  EXPECT_THROW(validate_tree(tree), MalformedTree);

  tree.nodes = {node("a", std::nullopt, Role::kHuman),
                node("b", std::string("zz"), Role::kAssistant)};
  EXPECT_THROW(validate_tree(tree), MalformedTree);

  tree.nodes = {node("a", std::nullopt, Role::kAssistant)};
  EXPECT_THROW(validate_tree(tree), MalformedTree);

  tree.nodes = {node("a", std::nullopt, Role::kHuman), node("b", std::string("c"), Role::kHuman),
                node("c", std::string("b"), Role::kAssistant)};
  EXPECT_THROW(validate_tree(tree), MalformedTree);

  EXPECT_THROW(parse_trees(nlohmann::json::array(), ""), DataError);
  EXPECT_THROW(parse_trees(nlohmann::json::parse(R"({"trees":[{"tree_id":"x","nodes":[
      {"node_id":"a","parent_id":null,"role":"moderator","text":"","lang":"it"}]}]})"),
                           ""),
               MalformedTree);
}

// Random tree with nodes attached to uniformly chosen earlier nodes.
ConversationTree random_tree(std::mt19937_64& rng, const std::string& id, std::size_t n,
                             bool mixed_languages) {
  ConversationTree tree;
  tree.tree_id = id;
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::string> parent;
    Role role = Role::kHuman;
    if (i > 0) {
      const std::size_t p = rng() % i;
      parent = tree.nodes[p].node_id;
      role = tree.nodes[p].role == Role::kHuman ? Role::kAssistant : Role::kHuman;
    }
    const std::string lang = mixed_languages && i > 0 && rng() % 4 == 0 ? "en" : "it";
    // Zero-padded so node_id order equals creation order.
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", i);
    tree.nodes.push_back(node(buf, parent, role, lang));
  }
  std::shuffle(tree.nodes.begin(), tree.nodes.end(), rng);
  return tree;
}

// Oracle: leaves counted by recursion over an explicit child map.
std::size_t oracle_leaves(const ConversationTree& tree) {
  std::map<std::string, std::vector<std::string>> children;
  std::string root;
  for (const auto& n : tree.nodes) {
    if (n.parent_id) {
      children[*n.parent_id].push_back(n.node_id);
    } else {
      root = n.node_id;
    }
  }
  std::function<std::size_t(const std::string&)> leaves = [&](const std::string& id) {
    auto it = children.find(id);
    if (it == children.end()) return std::size_t{1};
    std::size_t total = 0;
    for (const auto& c : it->second) total += leaves(c);
    return total;
  };
  return leaves(root);
}

TEST(SeedExtractor, RandomTreesYieldOneSeedPerLeaf) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto tree = random_tree(rng, "r" + std::to_string(trial), 1 + rng() % 40, false);
    ASSERT_NO_THROW(validate_tree(tree));
    const std::size_t leaves = oracle_leaves(tree);
    EXPECT_EQ(count_leaves(tree), leaves);

    const auto seeds = extract_seeds({tree});
    ASSERT_EQ(seeds.size(), leaves);
    std::map<std::string, const TreeNode*> by_id;
    for (const auto& n : tree.nodes) by_id[n.node_id] = &n;
    std::vector<std::string> previous_path;
    for (const auto& seed : seeds) {
      // Each seed is a root-to-leaf chain of parent links.
      ASSERT_FALSE(seed.messages.empty());
      std::optional<std::string> expected_parent;
      std::vector<std::string> path;
      for (const auto& m : seed.messages) {
        const std::string node_id = m.id.substr(m.id.find('/') + 1);
        const TreeNode* source = by_id.at(node_id);
        EXPECT_EQ(source->parent_id, expected_parent);
        EXPECT_EQ(m.text, source->text);
        EXPECT_EQ(m.role, source->role);
        expected_parent = node_id;
        path.push_back(node_id);
      }
      const auto& leaf = seed.provenance.at("leaf_node_id");
      EXPECT_EQ(leaf, *expected_parent);
      // Depth-first in node_id order visits paths in lexicographic order.
      EXPECT_LT(previous_path, path);
      previous_path = path;
    }
  }
}

TEST(SeedExtractor, PruningKeepsOnlyMatchingReachableNodes) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto tree = random_tree(rng, "p", 1 + rng() % 40, true);
    const auto pruned = prune_to_language(tree, "it");
    ASSERT_TRUE(pruned.has_value());
    ASSERT_NO_THROW(validate_tree(*pruned));
    EXPECT_EQ(pruned->nodes.size() + pruned->pruned_nodes, tree.nodes.size());

    // Oracle: a node survives when it and all its ancestors are Italian.
    std::map<std::string, const TreeNode*> by_id;
    for (const auto& n : tree.nodes) by_id[n.node_id] = &n;
    std::size_t expected = 0;
    for (const auto& n : tree.nodes) {
      bool ok = true;
      for (const TreeNode* cur = &n; cur; cur = cur->parent_id ? by_id[*cur->parent_id] : nullptr) {
        ok = ok && cur->lang == "it";
      }
      expected += ok;
    }
    EXPECT_EQ(pruned->nodes.size(), expected);
    for (const auto& seed : extract_seeds({*pruned})) {
      for (const auto& m : seed.messages) {
        EXPECT_EQ(by_id.at(m.id.substr(m.id.find('/') + 1))->lang, "it");
      }
    }
  }
  ConversationTree english{"e", {node("a", std::nullopt, Role::kHuman, "en")}};
  EXPECT_FALSE(prune_to_language(english, "it").has_value());
}

}  // namespace
}  // namespace corpusforge
