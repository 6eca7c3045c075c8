#include "semcom/task_kb.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace semcom {

std::string to_string(TaskId id) {
  return id == TaskId::RECONSTRUCT ? "RECONSTRUCT" : "SEGMENT";
}

TaskId task_id_from_string(const std::string& s) {
  if (s == "RECONSTRUCT") return TaskId::RECONSTRUCT;
  if (s == "SEGMENT") return TaskId::SEGMENT;
  throw ConfigError("unknown task id '" + s + "' (expected RECONSTRUCT or SEGMENT)");
}

double EmbeddingVector::l2_norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

namespace {

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokenize_lower(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

HashingEmbedder::HashingEmbedder(int dim) : dim_(dim) {
  if (dim < 8) throw ConfigError("embedding dimension must be at least 8");
}

EmbeddingVector HashingEmbedder::embed(const std::string& text) const {
  if (trimmed(text).empty()) throw EmbedderError("cannot embed empty text");
  EmbeddingVector v;
  v.values.assign(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& tok : tokenize_lower(text)) {
    v.values[fnv1a64(tok) % static_cast<std::uint64_t>(dim_)] += 1.0;
    if (tok.size() > 4) {
      const std::string stem = "p4:" + tok.substr(0, 4);
      v.values[fnv1a64(stem) % static_cast<std::uint64_t>(dim_)] += 1.0;
    }
  }
  const double n = v.l2_norm();
  if (n == 0.0) throw EmbedderError("text '" + text + "' produced no tokens");
  for (double& x : v.values) x /= n;
  return v;
}

HttpEmbedder::HttpEmbedder(std::string url, int dim, int timeout_s)
    : dim_(dim), timeout_s_(timeout_s) {
  // accept host:port or http://host:port
  std::string rest = url;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) {
    host_ = rest;
    port_ = 80;
  } else {
    host_ = rest.substr(0, colon);
    port_ = std::stoi(rest.substr(colon + 1));
  }
  if (host_.empty()) throw ConfigError("embedder url '" + url + "' has no host");
}

EmbeddingVector HttpEmbedder::embed(const std::string& text) const {
  if (trimmed(text).empty()) throw EmbedderError("cannot embed empty text");
  httplib::Client client(host_, port_);
  client.set_connection_timeout(timeout_s_, 0);
  client.set_read_timeout(timeout_s_, 0);
  nlohmann::json req{{"text", text}};
  auto res = client.Post("/embed", req.dump(), "application/json");
  if (!res) {
    throw EmbedderError("embedder endpoint " + host_ + ":" + std::to_string(port_) +
                        " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw EmbedderError("embedder endpoint returned HTTP " + std::to_string(res->status));
  }
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw EmbedderError(std::string("embedder response is not valid JSON: ") + e.what());
  }
  if (!body.contains("embedding") || !body["embedding"].is_array()) {
    throw EmbedderError("embedder response lacks an 'embedding' array");
  }
  EmbeddingVector v;
  for (const auto& x : body["embedding"]) v.values.push_back(x.get<double>());
  if (v.dim() != dim_) {
    throw EmbedderError("embedder returned dimension " + std::to_string(v.dim()) +
                        ", configured " + std::to_string(dim_));
  }
  for (double x : v.values) {
    if (!std::isfinite(x)) throw EmbedderError("embedder returned non-finite values");
  }
  return v;
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    throw Error("cosine_similarity: dimension mismatch " + std::to_string(u.dim()) +
                " vs " + std::to_string(v.dim()));
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (int i = 0; i < u.dim(); ++i) {
    dot += u.values[static_cast<std::size_t>(i)] * v.values[static_cast<std::size_t>(i)];
    nu += u.values[static_cast<std::size_t>(i)] * u.values[static_cast<std::size_t>(i)];
    nv += v.values[static_cast<std::size_t>(i)] * v.values[static_cast<std::size_t>(i)];
  }
  if (nu == 0.0 || nv == 0.0) throw Error("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

TaskKb::TaskKb(std::vector<TaskInstruction> memory, std::shared_ptr<const Embedder> embedder)
    : memory_(std::move(memory)), embedder_(std::move(embedder)) {
  if (memory_.empty()) throw ConfigError("task KB memory is empty");
  for (std::size_t i = 0; i < memory_.size(); ++i) {
    if (trimmed(memory_[i].canonical_text).empty()) {
      throw ConfigError("instruction " + to_string(memory_[i].id) + " has empty text");
    }
    for (std::size_t j = i + 1; j < memory_.size(); ++j) {
      if (memory_[i].id == memory_[j].id) {
        throw ConfigError("duplicate instruction id " + to_string(memory_[i].id) +
                          " in task KB memory");
      }
    }
  }
  for (const auto& ins : memory_) memory_vectors_.push_back(embedder_->embed(ins.canonical_text));
}

std::vector<TaskInstruction> TaskKb::default_memory() {
  return {
      {TaskId::RECONSTRUCT, "reconstruct restore rebuild the original image picture photo"},
      {TaskId::SEGMENT, "segment partition label the image regions objects classes"},
  };
}

TaskKb TaskKb::from_memory_file(const std::string& path,
                                std::shared_ptr<const Embedder> embedder) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open task memory file '" + path + "'");
  std::vector<TaskInstruction> memory;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected <ID><TAB><canonical text>");
    }
    memory.push_back({task_id_from_string(trimmed(line.substr(0, tab))),
                      trimmed(line.substr(tab + 1))});
  }
  return TaskKb(std::move(memory), std::move(embedder));
}

TaskInstruction TaskKb::select_instruction(const std::string& requirement) const {
  const EmbeddingVector r = embedder_->embed(requirement);
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t i = 0; i < memory_.size(); ++i) {
    const double s = cosine_similarity(r, memory_vectors_[i]);
    const bool wins = s > best_score ||
                      (s == best_score && static_cast<int>(memory_[i].id) <
                                              static_cast<int>(memory_[best].id));
    if (wins) {
      best = i;
      best_score = s;
    }
  }
  return memory_[best];
}

std::vector<TaskKb::Match> TaskKb::rank(const std::string& requirement) const {
  const EmbeddingVector r = embedder_->embed(requirement);
  std::vector<Match> matches;
  for (std::size_t i = 0; i < memory_.size(); ++i) {
    matches.push_back({memory_[i], cosine_similarity(r, memory_vectors_[i])});
  }
  std::stable_sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return static_cast<int>(a.instruction.id) < static_cast<int>(b.instruction.id);
  });
  return matches;
}

}  // namespace semcom
