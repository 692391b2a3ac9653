#pragma once

#include "grant/checkpoint.hpp"
#include "grant/dataset_io.hpp"
#include "grant/error.hpp"
#include "grant/flexgcn.hpp"
#include "grant/gntk.hpp"
#include "grant/graph.hpp"
#include "grant/loss.hpp"
#include "grant/metrics.hpp"
#include "grant/parallel.hpp"
#include "grant/synth.hpp"
#include "grant/teaching.hpp"
#include "grant/trainer.hpp"
