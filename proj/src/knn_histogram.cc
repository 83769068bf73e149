#include "corpusforge/knn_histogram.h"

#include "corpusforge/errors.h"
#include "corpusforge/parallel.h"

namespace corpusforge {

VectorStore embed_corpus(const Corpus& corpus, EmbedderClient& embedder,
                         std::size_t dimension, std::size_t batch_size) {
  std::vector<const Message*> messages;
  for (const auto& conversation : corpus.conversations) {
    for (const auto& message : conversation.messages) messages.push_back(&message);
  }

  VectorStore store(dimension);
  batch_size = std::max<std::size_t>(batch_size, 1);
  for (std::size_t start = 0; start < messages.size(); start += batch_size) {
    const std::size_t end = std::min(messages.size(), start + batch_size);
    std::vector<std::string> texts;
    for (std::size_t i = start; i < end; ++i) texts.push_back(messages[i]->text);

    std::vector<std::vector<float>> vectors;
    try {
      vectors = embedder.embed_batch(texts);
    } catch (const TransportError& e) {
      throw TransportError(e.what(), messages[start]->id);
    }
    if (vectors.size() != texts.size()) {
      throw TransportError("embedder returned " + std::to_string(vectors.size()) +
                               " vectors for " + std::to_string(texts.size()) + " texts",
                           messages[start]->id);
    }
    for (std::size_t i = start; i < end; ++i) store.add(vectors[i - start], messages[i]->id);
  }
  return store;
}

KnnHistogram distance_histogram(const VectorStore& store, const KnnHistogramOptions& options) {
  const std::size_t n = store.size();
  std::vector<std::vector<double>> per_entry(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    const auto query = store.vector(i);
    for (const auto& neighbor : store.knn(query, options.k, true, options.identity_epsilon)) {
      per_entry[i].push_back(1.0 - neighbor.similarity);
    }
  });

  KnnHistogram result;
  for (const auto& distances : per_entry) {
    result.distances.insert(result.distances.end(), distances.begin(), distances.end());
  }
  result.histogram = Histogram::build(result.distances, options.histogram);
  return result;
}

KnnHistogram distance_histogram(const Corpus& corpus, EmbedderClient& embedder,
                                const KnnHistogramOptions& options) {
  if (corpus.message_count() == 0) throw DataError("corpus has no messages to embed");
  const VectorStore store =
      embed_corpus(corpus, embedder, options.dimension, options.batch_size);
  return distance_histogram(store, options);
}

}  // namespace corpusforge
