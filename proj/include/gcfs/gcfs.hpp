// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "gcfs/adm.hpp"
#include "gcfs/audio.hpp"
#include "gcfs/engine.hpp"
#include "gcfs/eval.hpp"
#include "gcfs/factory.hpp"
#include "gcfs/fft.hpp"
#include "gcfs/gcfs_config.hpp"
#include "gcfs/gcfsnet.hpp"
#include "gcfs/geometry.hpp"
#include "gcfs/mvdr.hpp"
#include "gcfs/scene.hpp"
#include "gcfs/stft.hpp"
#include "gcfs/wav.hpp"
#include "gcfs/weights_io.hpp"
