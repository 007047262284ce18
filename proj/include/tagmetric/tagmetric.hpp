// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tagmetric Authors

#pragma once

#include "tagmetric/checkpoint.hpp"
#include "tagmetric/core.hpp"
#include "tagmetric/dataset.hpp"
#include "tagmetric/errors.hpp"
#include "tagmetric/net.hpp"
#include "tagmetric/retrieval.hpp"
#include "tagmetric/synth.hpp"
#include "tagmetric/trainer.hpp"
#include "tagmetric/triplet.hpp"
#include "tagmetric/wmf.hpp"
#include "tagmetric/wordvec.hpp"
