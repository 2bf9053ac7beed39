// Copyright 2026 The evotod Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVOTOD_ERRORS_HPP_
#define EVOTOD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace evotod {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Operation on a strategy whose lifecycle flag forbids it.
class LifecycleError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Malformed persisted data. `record` names the first offending record.
class ParseError : public Error {
 public:
  ParseError(std::string record, const std::string& message, std::string field = {})
      : Error(message), record_(std::move(record)), field_(std::move(field)) {}
  const std::string& record() const { return record_; }
  const std::string& field() const { return field_; }

 private:
  std::string record_;
  std::string field_;
};

class NoCandidatesError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  TemplateError(std::string placeholder, const std::string& message)
      : Error(message), placeholder_(std::move(placeholder)) {}
  const std::string& placeholder() const { return placeholder_; }

 private:
  std::string placeholder_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// The model never produced a reply satisfying the response schema.
class StructuredOutputError : public Error {
 public:
  StructuredOutputError(const std::string& message, std::string raw_reply,
                        int attempts, bool schema_ok)
      : Error(message),
        raw_reply_(std::move(raw_reply)),
        attempts_(attempts),
        schema_ok_(schema_ok) {}
  const std::string& raw_reply() const { return raw_reply_; }
  int attempts() const { return attempts_; }
  // True when the last reply parsed and matched the schema but failed a
  // caller-supplied semantic check.
  bool schema_ok() const { return schema_ok_; }

 private:
  std::string raw_reply_;
  int attempts_;
  bool schema_ok_;
};

class CountMismatchError : public StructuredOutputError {
 public:
  using StructuredOutputError::StructuredOutputError;
};

class DatabaseError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

}  // namespace evotod

#endif  // EVOTOD_ERRORS_HPP_
