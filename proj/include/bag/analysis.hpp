#pragma once

#include "bag/analysis/codebleu.hpp"
#include "bag/analysis/csv.hpp"
#include "bag/analysis/relevance.hpp"
#include "bag/analysis/report.hpp"
