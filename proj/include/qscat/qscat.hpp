// Copyright 2026 The qscat Authors
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

// Umbrella header for the numerical core. The config and experiment layers
// (which need nlohmann/json) are included separately.

#pragma once

#include "qscat/dynamics.hpp"
#include "qscat/errors.hpp"
#include "qscat/linalg.hpp"
#include "qscat/quadrature.hpp"
#include "qscat/scatmap.hpp"
#include "qscat/scatterer.hpp"
#include "qscat/thermo.hpp"
#include "qscat/wavepacket.hpp"
