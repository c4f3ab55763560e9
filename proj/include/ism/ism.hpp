// Copyright 2026 The ISM Authors
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

// Everything except the network service, which pulls in Boost; include
// "ism/service.hpp" separately for that.

#include "ism/error.hpp"
#include "ism/submodular.hpp"
#include "ism/coverage.hpp"
#include "ism/qp.hpp"
#include "ism/json_util.hpp"
#include "ism/oism.hpp"
#include "ism/bbism.hpp"
#include "ism/miqp.hpp"
#include "ism/simulation.hpp"
#include "ism/instance_io.hpp"
#include "ism/bench.hpp"
