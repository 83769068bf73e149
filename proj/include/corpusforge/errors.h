#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace corpusforge {

// Root of every error the toolkit raises. The CLI maps the three direct
// subclasses onto its exit codes: ConfigError -> 1, DataError -> 2,
// TransportError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Network, HTTP status, or malformed-response failure talking to a model
// endpoint. `message_id` names the corpus message being processed, if any.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, std::string message_id = {})
      : Error(message_id.empty() ? what : what + " (message " + message_id + ")"),
        message_id_(std::move(message_id)) {}

  const std::string& message_id() const { return message_id_; }

 private:
  std::string message_id_;
};

class FileError : public DataError {
 public:
  FileError(const std::string& path, const std::string& reason)
      : DataError(path + ": " + reason), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class UnparseableTranscript : public DataError {
 public:
  UnparseableTranscript(std::size_t offset, const std::string& reason)
      : DataError("unparseable transcript at byte " + std::to_string(offset) +
                  ": " + reason),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class MalformedRecord : public DataError {
 public:
  MalformedRecord(std::size_t line, const std::string& reason)
      : DataError("malformed record at line " + std::to_string(line) + ": " +
                  reason),
        line_(line),
        reason_(reason) {}
  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class DuplicateConversationId : public DataError {
 public:
  explicit DuplicateConversationId(const std::string& id)
      : DataError("duplicate conversation id: " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class MissingHash : public DataError {
 public:
  explicit MissingHash(const std::string& message_id)
      : DataError("message " + message_id + " has no content_hash"),
        message_id_(message_id) {}
  const std::string& message_id() const { return message_id_; }

 private:
  std::string message_id_;
};

class DimensionMismatch : public DataError {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : DataError("dimension mismatch: expected " + std::to_string(expected) +
                  ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class MalformedTree : public DataError {
 public:
  MalformedTree(const std::string& tree_id, const std::string& reason)
      : DataError("malformed tree " + tree_id + ": " + reason),
        tree_id_(tree_id) {}
  const std::string& tree_id() const { return tree_id_; }

 private:
  std::string tree_id_;
};

class EmptySeedPool : public DataError {
 public:
  EmptySeedPool() : DataError("seed pool is empty") {}
};

class EmptyText : public DataError {
 public:
  EmptyText() : DataError("text is empty after canonicalization") {}
};

class ZeroTokens : public DataError {
 public:
  ZeroTokens() : DataError("scorer returned no token positions") {}
};

class ScoringFailed : public DataError {
 public:
  using DataError::DataError;
};

class DetectorFailure : public DataError {
 public:
  DetectorFailure(const std::string& message_id, const std::string& reason)
      : DataError("language detection failed for message " + message_id +
                  ": " + reason),
        message_id_(message_id) {}
  const std::string& message_id() const { return message_id_; }

 private:
  std::string message_id_;
};

// Raised by run_campaign when every conversation of the campaign failed.
class CampaignFailed : public TransportError {
 public:
  using TransportError::TransportError;
};

}  // namespace corpusforge
