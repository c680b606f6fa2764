/* Copyright 2026 The topicrefine Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

	http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include "unit/helpers.hpp"

#include <gtest/gtest.h>

#define EXPECT_ERROR_KIND(stmt, expected_kind)                                   \
  do {                                                                           \
    try {                                                                        \
      stmt;                                                                      \
      ADD_FAILURE() << "expected " #expected_kind " from " #stmt;                \
    } catch (const ::topicrefine::Error& e) {                                    \
      EXPECT_EQ(e.kind(), ::topicrefine::ErrorKind::expected_kind) << e.what();  \
    }                                                                            \
  } while (0)
