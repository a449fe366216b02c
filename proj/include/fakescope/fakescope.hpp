#pragma once

#include "fakescope/annotation.hpp"
#include "fakescope/classifier.hpp"
#include "fakescope/corpus.hpp"
#include "fakescope/detection_model.hpp"
#include "fakescope/distribution.hpp"
#include "fakescope/error.hpp"
#include "fakescope/experiment.hpp"
#include "fakescope/ngram_model.hpp"
#include "fakescope/parallel.hpp"
#include "fakescope/remote_model.hpp"
#include "fakescope/sampler.hpp"
#include "fakescope/scoring.hpp"
#include "fakescope/service.hpp"
#include "fakescope/stats.hpp"
#include "fakescope/tokenizer.hpp"
#include "fakescope/vocabulary.hpp"
