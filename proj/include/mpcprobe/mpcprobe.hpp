#pragma once

// Convenience header for the whole toolkit.

#include "mpcprobe/aux_generation.hpp"
#include "mpcprobe/backend.hpp"
#include "mpcprobe/corpus.hpp"
#include "mpcprobe/diagnostic.hpp"
#include "mpcprobe/error.hpp"
#include "mpcprobe/evaluation.hpp"
#include "mpcprobe/graph.hpp"
#include "mpcprobe/http_backend.hpp"
#include "mpcprobe/prompt.hpp"
#include "mpcprobe/report.hpp"
#include "mpcprobe/scoring.hpp"
#include "mpcprobe/synthetic.hpp"
#include "mpcprobe/task.hpp"
#include "mpcprobe/util.hpp"
