#pragma once

#include "ahr/cce.hpp"
#include "ahr/dataset.hpp"
#include "ahr/exemplar_memory.hpp"
#include "ahr/hae.hpp"
#include "ahr/net.hpp"
#include "ahr/report.hpp"
#include "ahr/strategy.hpp"
#include "ahr/trainer.hpp"
