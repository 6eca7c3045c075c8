#pragma once

#include <memory>
#include <string>
#include <vector>

#include "semcom/common.hpp"

namespace semcom {

// Discrete task tokens understood by the decoders.
enum class TaskId { RECONSTRUCT = 0, SEGMENT = 1 };

std::string to_string(TaskId id);
TaskId task_id_from_string(const std::string& s);

struct TaskInstruction {
  TaskId id;
  std::string canonical_text;
};

struct EmbeddingVector {
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
  double l2_norm() const;
};

struct EmbedderError : Error {
  using Error::Error;
};

// Pluggable text embedder. Implementations must be deterministic per input
// or report failures; silently returning a fallback vector is not allowed.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  virtual EmbeddingVector embed(const std::string& text) const = 0;
};

// Default embedder: lower-cased word tokens (plus 4-character prefixes, so
// inflected forms land in shared buckets) hashed into d buckets, then
// L2-normalized. Deterministic, needs no external service.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(int dim = 256);
  int dim() const override { return dim_; }
  EmbeddingVector embed(const std::string& text) const override;

 private:
  int dim_;
};

// Client for an external sentence-encoder endpoint: POST {"text": ...} to
// <url>/embed, expects {"embedding": [...]}. Transport or protocol failures
// raise EmbedderError.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(std::string url, int dim, int timeout_s = 5);
  int dim() const override { return dim_; }
  EmbeddingVector embed(const std::string& text) const override;

 private:
  std::string host_;
  int port_;
  int dim_;
  int timeout_s_;
};

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

// Task KB: instruction memory plus similarity-based requirement matching.
// Identical memory files yield identical routing at transmitter and receiver.
class TaskKb {
 public:
  TaskKb(std::vector<TaskInstruction> memory, std::shared_ptr<const Embedder> embedder);

  static TaskKb from_memory_file(const std::string& path,
                                 std::shared_ptr<const Embedder> embedder);
  static std::vector<TaskInstruction> default_memory();

  // argmax of cosine similarity against every instruction; ties break to the
  // lowest instruction id.
  TaskInstruction select_instruction(const std::string& requirement) const;

  struct Match {
    TaskInstruction instruction;
    double similarity;
  };
  // all instructions with scores, sorted by descending similarity
  std::vector<Match> rank(const std::string& requirement) const;

  const std::vector<TaskInstruction>& memory() const { return memory_; }
  const Embedder& embedder() const { return *embedder_; }

 private:
  std::vector<TaskInstruction> memory_;
  std::shared_ptr<const Embedder> embedder_;
  std::vector<EmbeddingVector> memory_vectors_;
};

}  // namespace semcom
