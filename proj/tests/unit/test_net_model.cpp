#include "alohanum/net_model.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

namespace {

using namespace alohanum;

std::string temp_path(const std::string& name) {
  return std::string(::testing::TempDir()) + "/" + name;
}

TEST(NetModel, LinearSmallest) {
  Topology t = build_linear(2);
  EXPECT_EQ(t.node_count(), 2);
  ASSERT_EQ(t.link_count(), 2);
  EXPECT_EQ(t.link(0), (Link{0, 1}));
  EXPECT_EQ(t.link(1), (Link{1, 0}));
}

TEST(NetModel, LinearFour) {
  Topology t = build_linear(4);
  EXPECT_EQ(t.link_count(), 6);
  EXPECT_EQ(t.neighbors(1), (std::vector<int>{0, 2}));
}

TEST(NetModel, LinearTenHasEighteenLinks) {
  EXPECT_EQ(build_linear(10).link_count(), 18);
}

TEST(NetModel, StarDegenerateEqualsPair) {
  EXPECT_EQ(build_star(2), build_linear(2));
}

TEST(NetModel, StarThree) {
  Topology t = build_star(3);
  EXPECT_EQ(t.link_count(), 4);
  EXPECT_EQ(t.neighbors(0), (std::vector<int>{1, 2}));
  EXPECT_EQ(t.neighbors(1), (std::vector<int>{0}));
}

TEST(NetModel, StarNine) {
  Topology t = build_star(9);
  EXPECT_EQ(t.link_count(), 16);
  EXPECT_EQ(t.out_links(0).size(), 8u);
}

TEST(NetModel, GeneratorSizeRejected) {
  EXPECT_THROW(build_linear(1), ValidationError);
  EXPECT_THROW(build_star(0), ValidationError);
}

TEST(NetModel, GeneratorFamilyProperties) {
  for (int n = 2; n <= 64; ++n) {
    for (const Topology& t : {build_linear(n), build_star(n)}) {
      EXPECT_EQ(t.link_count(), 2 * n - 2);
      for (const Link& l : t.links()) {
        EXPECT_TRUE(t.has_link(l.to, l.from));
        EXPECT_NE(l.from, l.to);
      }
      for (int i = 0; i < n; ++i)
        for (int j : t.neighbors(i)) {
          const auto& back = t.neighbors(j);
          EXPECT_NE(std::find(back.begin(), back.end(), i), back.end());
        }
    }
    EXPECT_EQ(build_linear(n), build_linear(n));
    EXPECT_EQ(build_star(n), build_star(n));
  }
}

TEST(NetModel, Sample10Counts) {
  Network net = build_sample10();
  EXPECT_EQ(net.topology.node_count(), 10);
  EXPECT_EQ(net.topology.link_count(), 12);
  ASSERT_EQ(net.sessions.size(), 4u);
  for (const Session& s : net.sessions) EXPECT_NO_THROW(validate_session(net.topology, s));
}

TEST(NetModel, Sample10MatchesShippedDataFile) {
  Network from_file = load_network(std::string(ALOHANUM_SOURCE_DIR) + "/data/sample10.json");
  EXPECT_EQ(from_file, build_sample10());
}

TEST(NetModel, SaveLoadRoundTrip) {
  Network net{build_star(3), {Session{7, {{1, 0}, {0, 2}}, 25.0}}};
  const std::string path = temp_path("roundtrip.json");
  save_network(net, path);
  EXPECT_EQ(load_network(path), net);
}

TEST(NetModel, LoadRejectsLoopingRoute) {
  const std::string path = temp_path("loop.json");
  std::ofstream(path) << R"({"nodes":3,"energy":[1,1,1],
    "links":[[0,1],[1,0],[1,2],[2,1]],
    "sessions":[{"id":0,"route":[[0,1],[1,0]],"delay_bound":10}]})";
  try {
    load_network(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("twice"), std::string::npos);
  }
}

TEST(NetModel, LoadRejectsMissingReverseLink) {
  const std::string path = temp_path("asym.json");
  std::ofstream(path) << R"({"nodes":2,"energy":[1,1],"links":[[0,1]],"sessions":[]})";
  try {
    load_network(path);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("symmetric"), std::string::npos);
  }
}

TEST(NetModel, LoadRejectsDanglingLinkIndex) {
  const std::string path = temp_path("dangling.json");
  std::ofstream(path) << R"({"nodes":2,"energy":[1,1],"links":[[0,5],[5,0]]})";
  EXPECT_THROW(load_network(path), ValidationError);
}

TEST(NetModel, LoadRejectsRouteLinkNotInTopology) {
  const std::string path = temp_path("offroute.json");
  std::ofstream(path) << R"({"nodes":3,"energy":[1,1,1],"links":[[0,1],[1,0]],
    "sessions":[{"id":0,"route":[[1,2]],"delay_bound":10}]})";
  EXPECT_THROW(load_network(path), ValidationError);
}

TEST(NetModel, LoadRejectsMalformedJsonAndMissingFile) {
  const std::string path = temp_path("broken.json");
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_network(path), ValidationError);
  EXPECT_THROW(load_network(temp_path("does_not_exist.json")), IoError);
}

TEST(NetModel, TopologyRejectsBadEnergy) {
  EXPECT_THROW(Topology(2, {{0, 1}, {1, 0}}, {1.0}), ValidationError);
  EXPECT_THROW(Topology(2, {{0, 1}, {1, 0}}, {1.0, 0.0}), ValidationError);
}

TEST(NetModel, TopologyRejectsSelfLoopAndDuplicate) {
  EXPECT_THROW(Topology(2, {{0, 0}}), ValidationError);
  EXPECT_THROW(Topology(2, {{0, 1}, {0, 1}, {1, 0}}), ValidationError);
}

}  // namespace
