// Copyright 2026 The segpark Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace segpark
{

/// Base for recoverable domain failures raised by the core library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A ground-truth segment moves both forward and backward.
class AmbiguousGear : public Error
{
public:
  using Error::Error;
};

/// Rejection sampling could not produce a valid scenario.
class GenerationFailed : public Error
{
public:
  using Error::Error;
};

/// The expert search space was exhausted.
class NoPathFound : public Error
{
public:
  using Error::Error;
};

/// No rollout candidate has a valid segment.
class NoValidCandidate : public Error
{
public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error
{
public:
  using Error::Error;
};

/// Malformed dataset or checkpoint payload.
class FormatError : public Error
{
public:
  using Error::Error;
};

/// Training produced a NaN or infinite loss.
class NonFiniteLoss : public Error
{
public:
  using Error::Error;
};

/// Tensor shapes or configs do not line up.
class ShapeError : public Error
{
public:
  using Error::Error;
};

}  // namespace segpark
