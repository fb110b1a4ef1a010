#pragma once

#include "stepseq/config.hpp"
#include "stepseq/horizon.hpp"
#include "stepseq/io.hpp"
#include "stepseq/qp.hpp"
#include "stepseq/sensitivity.hpp"
#include "stepseq/sequencer.hpp"
#include "stepseq/simulator.hpp"
#include "stepseq/types.hpp"
