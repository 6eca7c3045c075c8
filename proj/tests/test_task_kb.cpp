#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "fixture_path.hpp"
#include "semcom/rng.hpp"
#include "semcom/task_kb.hpp"

using namespace semcom;

namespace {

std::shared_ptr<const HashingEmbedder> default_embedder() {
  static auto e = std::make_shared<HashingEmbedder>(256);
  return e;
}

TaskKb default_kb() { return TaskKb(TaskKb::default_memory(), default_embedder()); }

// scales every embedding by a constant; cosine results must not move
class ScaledEmbedder : public Embedder {
 public:
  ScaledEmbedder(std::shared_ptr<const Embedder> inner, double factor)
      : inner_(std::move(inner)), factor_(factor) {}
  int dim() const override { return inner_->dim(); }
  EmbeddingVector embed(const std::string& text) const override {
    EmbeddingVector v = inner_->embed(text);
    for (double& x : v.values) x *= factor_;
    return v;
  }

 private:
  std::shared_ptr<const Embedder> inner_;
  double factor_;
};

}  // namespace

TEST_CASE("default embedder: deterministic, unit norm, dimension 256") {
  const auto e = default_embedder();
  const auto a = e->embed("reconstruct the image");
  const auto b = e->embed("reconstruct the image");
  CHECK(a.values == b.values);
  CHECK(a.dim() == 256);
  CHECK(a.l2_norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS((void)e->embed(""), EmbedderError);
  CHECK_THROWS_AS((void)e->embed("   \t "), EmbedderError);
}

TEST_CASE("cosine similarity: analytic values and properties") {
  EmbeddingVector u{{1.0, 0.0}};
  EmbeddingVector v{{1.0, 1.0}};
  CHECK(cosine_similarity(u, u) == doctest::Approx(1.0));
  CHECK(cosine_similarity(u, v) == doctest::Approx(0.70710678).epsilon(1e-9));
  EmbeddingVector w{{0.0, 2.0}};
  CHECK(cosine_similarity(u, w) == doctest::Approx(0.0));

  // symmetry and scale invariance on random vectors
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    EmbeddingVector a, b;
    for (int i = 0; i < 16; ++i) {
      a.values.push_back(rng.uniform(-1, 1));
      b.values.push_back(rng.uniform(-1, 1));
    }
    const double ab = cosine_similarity(a, b);
    CHECK(ab >= -1.0);
    CHECK(ab <= 1.0);
    CHECK(cosine_similarity(b, a) == doctest::Approx(ab).epsilon(1e-12));
    EmbeddingVector a2 = a;
    const double alpha = rng.uniform(0.1, 5.0);
    for (double& x : a2.values) x *= alpha;
    CHECK(cosine_similarity(a2, b) == doctest::Approx(ab).epsilon(1e-9));
  }

  EmbeddingVector zero{{0.0, 0.0}};
  CHECK_THROWS_AS((void)cosine_similarity(u, zero), Error);
  EmbeddingVector three{{1.0, 2.0, 3.0}};
  CHECK_THROWS_AS((void)cosine_similarity(u, three), Error);
}

TEST_CASE("self similarity dominates cross similarity") {
  const auto e = default_embedder();
  const auto seg = e->embed("segment the photo");
  const auto rec = e->embed("reconstruct the image");
  const double cross = cosine_similarity(seg, rec);
  CHECK(cross < cosine_similarity(seg, seg));
  CHECK(cross < cosine_similarity(rec, rec));
}

TEST_CASE("select_instruction: canonical self-retrieval and argmax routing") {
  const TaskKb kb = default_kb();
  for (const auto& ins : kb.memory()) {
    CHECK(kb.select_instruction(ins.canonical_text).id == ins.id);
  }

  // verified against explicit score computation with the same embedder
  const std::string req = "please restore the picture pixels";
  const auto e = default_embedder();
  const auto r = e->embed(req);
  double s_rec = 0.0, s_seg = 0.0;
  for (const auto& ins : kb.memory()) {
    const double s = cosine_similarity(r, e->embed(ins.canonical_text));
    (ins.id == TaskId::RECONSTRUCT ? s_rec : s_seg) = s;
  }
  CHECK(s_rec > s_seg);
  CHECK(kb.select_instruction(req).id == TaskId::RECONSTRUCT);

  // single-instruction memory returns it for any requirement
  TaskKb single(std::vector<TaskInstruction>{{TaskId::SEGMENT, "segment the image"}},
                default_embedder());
  CHECK(single.select_instruction("anything at all").id == TaskId::SEGMENT);

  CHECK_THROWS_AS(TaskKb({}, default_embedder()), ConfigError);
}

TEST_CASE("ties break to the lowest instruction id") {
  // two instructions with identical canonical text: equal scores by construction
  TaskKb kb(std::vector<TaskInstruction>{{TaskId::SEGMENT, "alpha beta"},
                                         {TaskId::RECONSTRUCT, "alpha beta"}},
            default_embedder());
  CHECK(kb.select_instruction("alpha beta").id == TaskId::RECONSTRUCT);
}

TEST_CASE("argmax is invariant under uniform embedding scaling") {
  const TaskKb base = default_kb();
  const std::vector<std::string> reqs{"restore the photo", "segment the regions",
                                      "label the objects", "rebuild the picture"};
  for (double alpha : {0.25, 3.0}) {
    TaskKb scaled(TaskKb::default_memory(),
                  std::make_shared<ScaledEmbedder>(default_embedder(), alpha));
    for (const auto& r : reqs) {
      CHECK(scaled.select_instruction(r).id == base.select_instruction(r).id);
    }
  }
}

TEST_CASE("memory file round-trip and identical tx/rx construction") {
  const std::string path = "kb_memory_test.tsv";
  {
    std::ofstream f(path);
    f << "# comment line\n";
    f << "RECONSTRUCT\treconstruct restore the original image\n";
    f << "SEGMENT\tsegment label the image regions\n";
  }
  const TaskKb tx = TaskKb::from_memory_file(path, default_embedder());
  const TaskKb rx = TaskKb::from_memory_file(path, default_embedder());
  REQUIRE(tx.memory().size() == 2);
  CHECK(tx.memory()[0].canonical_text == "reconstruct restore the original image");
  for (const auto& req : {"restore my image", "segment the image", "label regions"}) {
    CHECK(tx.select_instruction(req).id == rx.select_instruction(req).id);
  }

  {
    std::ofstream f(path);
    f << "RECONSTRUCT no tab separator here\n";
  }
  CHECK_THROWS_AS((void)TaskKb::from_memory_file(path, default_embedder()), DataError);
  CHECK_THROWS_AS((void)TaskKb::from_memory_file("missing_file.tsv", default_embedder()),
                  DataError);
  std::remove(path.c_str());
}

TEST_CASE("rank returns every instruction sorted by similarity") {
  const TaskKb kb = default_kb();
  const auto matches = kb.rank("segment the image into regions");
  REQUIRE(matches.size() == 2);
  CHECK(matches[0].instruction.id == TaskId::SEGMENT);
  CHECK(matches[0].similarity >= matches[1].similarity);
  for (const auto& m : matches) {
    CHECK(m.similarity >= -1.0);
    CHECK(m.similarity <= 1.0);
  }
  // stable across invocations
  const auto again = kb.rank("segment the image into regions");
  CHECK(again[0].similarity == matches[0].similarity);
  CHECK(again[1].similarity == matches[1].similarity);
}

TEST_CASE("routing fixture: paraphrases route to the right instruction") {
  const TaskKb kb = default_kb();
  std::ifstream f(test::fixture_path("task_requirements.txt"));
  REQUIRE(f.good());
  int total = 0, correct = 0;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    REQUIRE(tab != std::string::npos);
    const TaskId expect = task_id_from_string(line.substr(0, tab));
    ++total;
    correct += (kb.select_instruction(line.substr(tab + 1)).id == expect);
  }
  CHECK(total == 20);
  CHECK(correct >= 18);
}

TEST_CASE("http embedder: served vector round-trips, failures are reported") {
  httplib::Server server;
  server.Post("/embed", [](const httplib::Request&, httplib::Response& res) {
    std::string body = "{\"embedding\": [";
    for (int i = 0; i < 16; ++i) body += (i ? "," : "") + std::to_string(0.25 * (i % 4));
    body += "]}";
    res.set_content(body, "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  HttpEmbedder ok("127.0.0.1:" + std::to_string(port), 16);
  const auto v = ok.embed("hello");
  CHECK(v.dim() == 16);
  CHECK(v.values[1] == doctest::Approx(0.25));

  HttpEmbedder wrong_dim("127.0.0.1:" + std::to_string(port), 32);
  CHECK_THROWS_AS((void)wrong_dim.embed("hello"), EmbedderError);

  server.stop();
  t.join();

  // connection refused: reported, never silently defaulted
  HttpEmbedder dead("127.0.0.1:1", 16, 1);
  CHECK_THROWS_AS((void)dead.embed("hello"), EmbedderError);
}
