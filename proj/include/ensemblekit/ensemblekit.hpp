#pragma once

#include "ensemblekit/combiner.hpp"
#include "ensemblekit/diversity.hpp"
#include "ensemblekit/error.hpp"
#include "ensemblekit/gaussmodel.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/predictions.hpp"
#include "ensemblekit/report.hpp"
