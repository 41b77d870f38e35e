#include "ampe/server.hpp"

#include "ampe/image_io.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <random>
#include <set>
#include <thread>

#include "tiny_arch.hpp"

namespace ampe {
namespace {

namespace fs = std::filesystem;

std::string random_png(Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor<double> t(3, h, w);
  for (Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = u(rng);
  const auto bytes = encode_png(t);
  return {bytes.begin(), bytes.end()};
}

Tensor<double> decode(const std::string& body) {
  return decode_png({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()});
}

class ServerFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    base_ = fs::temp_directory_path() / "ampe_server_test";
    fs::remove_all(base_);
    save_checkpoint(build_model(testing_support::tiny_architecture(), ModelFlags{}, 4), CheckpointMeta{}, base_ / "ckpt");
    fs::create_directories(base_ / "static");
    std::ofstream(base_ / "static" / "index.html") << "<html>viewer</html>";
  }
  static void TearDownTestSuite() { fs::remove_all(base_); }

  void start(bool with_static = false) {
    ServerOptions o;
    o.checkpoint = base_ / "ckpt";
    o.root = base_ / ::testing::UnitTest::GetInstance()->current_test_info()->name();
    if (with_static) o.static_dir = base_ / "static";
    server_ = std::make_unique<Server>(o);
    port_ = server_->bind(0);
    thread_ = std::thread([this] { server_->run(); });
  }
  void TearDown() override {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }
  std::string post_png(const std::string& body) const {
    auto r = client().Post("/derain", body, "image/png");
    EXPECT_TRUE(r);
    EXPECT_EQ(r->status, 200) << r->body;
    return nlohmann::json::parse(r->body).at("run_id").get<std::string>();
  }

  static inline fs::path base_;
  std::unique_ptr<Server> server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(ServerFixture, UploadThenFetchThreeImages) {
  start();
  const std::string png = random_png(64, 64, 1);
  const std::string id = post_png(png);
  for (const char* name : {"input", "bm", "refined"}) {
    auto r = client().Get("/result/" + id + "/" + name + ".png");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << name;
    EXPECT_EQ(r->get_header_value("Content-Type"), "image/png");
    const Tensor<double> t = decode(r->body);
    EXPECT_EQ(t.height, 64);
    EXPECT_EQ(t.width, 64);
  }
  EXPECT_EQ(decode(client().Get("/result/" + id + "/input.png")->body).data, decode(png).data);
}

TEST_F(ServerFixture, ErrorsAre400And404) {
  start();
  auto bad = client().Post("/derain", "definitely not a png", "image/png");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  std::string truncated = random_png(16, 16, 2);
  truncated.resize(40);
  EXPECT_EQ(client().Post("/derain", truncated, "image/png")->status, 400);
  EXPECT_EQ(client().Get("/result/nope/bm.png")->status, 404);
  EXPECT_EQ(client().Get("/result/..%2F..%2Fckpt/bm.png")->status, 404);
  const std::string id = post_png(random_png(32, 32, 3));
  EXPECT_EQ(client().Get("/result/" + id + "/manifest.png")->status, 404);
}

TEST_F(ServerFixture, RunsListsFinishedIds) {
  start();
  const std::string a = post_png(random_png(32, 32, 4));
  const std::string b = post_png(random_png(32, 32, 5));
  auto r = client().Get("/runs");
  ASSERT_TRUE(r);
  const auto ids = nlohmann::json::parse(r->body).get<std::vector<std::string>>();
  EXPECT_EQ(ids.size(), 2u);
  EXPECT_NE(std::find(ids.begin(), ids.end(), a), ids.end());
  EXPECT_NE(std::find(ids.begin(), ids.end(), b), ids.end());
  EXPECT_TRUE(fs::is_empty(server_->service().root() / "staging"));
}

TEST_F(ServerFixture, ConcurrentUploadsStaySeparate) {
  start();
  constexpr int kClients = 4;
  std::vector<std::string> bodies, ids(kClients);
  for (int i = 0; i < kClients; ++i) bodies.push_back(random_png(32, 32, 100 + i));
  std::vector<std::thread> threads;
  for (int i = 0; i < kClients; ++i) threads.emplace_back([&, i] { ids[i] = post_png(bodies[i]); });
  for (auto& t : threads) t.join();
  std::set<std::string> distinct(ids.begin(), ids.end());
  EXPECT_EQ(distinct.size(), static_cast<std::size_t>(kClients));
  for (int i = 0; i < kClients; ++i) {
    auto r = client().Get("/result/" + ids[i] + "/input.png");
    ASSERT_TRUE(r);
    EXPECT_EQ(decode(r->body).data, decode(bodies[i]).data) << "client " << i;
  }
}

TEST_F(ServerFixture, BuiltinViewerPage) {
  start();
  auto r = client().Get("/");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_NE(r->body.find("derain"), std::string::npos);
}

TEST_F(ServerFixture, StaticDirectoryServedAtRoot) {
  start(true);
  auto r = client().Get("/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "<html>viewer</html>");
}

TEST(DerainService, RejectsIncompleteModel) {
  Model<float> partial = build_model(testing_support::tiny_architecture(), ModelFlags{}, 1);
  partial.refnet.reset();
  EXPECT_THROW(DerainService(partial, fs::temp_directory_path() / "ampe_server_partial"), ConfigError);
}

}  // namespace
}  // namespace ampe
