#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "corpusforge/clients.h"
#include "corpusforge/corpus.h"
#include "corpusforge/histogram.h"
#include "corpusforge/vector_store.h"

namespace corpusforge {

struct KnnHistogramOptions {
  std::size_t k = 10;
  std::size_t dimension = 512;
  std::size_t batch_size = 64;
  double identity_epsilon = 1e-6;
  std::size_t jobs = 1;
  HistogramSpec histogram{0.0, 2.0, 40};
};

struct KnnHistogram {
  Histogram histogram;
  std::vector<double> distances;  // message order, then neighbor rank
};

// Embeds every message of `corpus` with `embedder` (in batches of
// options.batch_size) into a vector store labelled with message ids.
// Transport errors are rethrown naming the first message of the failed batch.
VectorStore embed_corpus(const Corpus& corpus, EmbedderClient& embedder,
                         std::size_t dimension, std::size_t batch_size);

// Nearest-neighbor cosine distance (1 - similarity) distribution: for each
// message, its k nearest neighbors excluding identical embeddings.
KnnHistogram distance_histogram(const Corpus& corpus, EmbedderClient& embedder,
                                const KnnHistogramOptions& options);

// Same computation over an already-populated store.
KnnHistogram distance_histogram(const VectorStore& store, const KnnHistogramOptions& options);

}  // namespace corpusforge
