# SPDX-License-Identifier: MIT
# Copyright 2025 The nhbp authors

"""
Figure recipes

Each recipe is the text of a run config, as read by nhbp_cli, for one
of the reference plots of the two-band chains:

  fig2a..fig2d  SSH chain, |E|, P and ν_tot against t1
  fig3a, fig3b  x-OBC Chern model, against ky
  fig4a, fig4b  x-OBC Chern model PBC/OBC phase diagrams in (γ, t1)
  fig5a, fig5b  y-OBC Chern models, against kx

Sweep ranges and grid sizes are chosen to resolve every transition.
"""

__all__ = ["RECIPES", "recipe_names", "recipe_text"]

_SSH_SWEEP = """\
[run]
command = sweep

[model]
variant = ssh1d
t2 = 1
t3 = {t3}
gamma = {gamma}
delta_onsite = {delta_onsite}

[numeric]
sweep_parameter = t1
sweep_start = 0.05
sweep_stop = 3.0
sweep_points = 119
n_cells = {n_obc}
n_p = {n_p}

[output]
formats = csv, json, svg
"""

_CHERN_X_SWEEP = """\
[run]
command = sweep

[model]
variant = chern_x_obc
t1 = {t1}
t3 = {t3}
gamma = {gamma}
delta_onsite = {delta_onsite}
delta_stagger = {delta_stagger}

[numeric]
sweep_parameter = transverse_k
sweep_start = 0
sweep_stop = 6.283185307179586
sweep_points = 241
n_cells = {n_obc}
n_p = {n_p}

[output]
formats = csv, json, svg
"""

_CHERN_Y_SWEEP = """\
[run]
command = sweep

[model]
variant = {variant}
t1 = 1
t3 = 0
gamma = 0.4
delta_onsite = 0.1
delta_stagger = 1.75

[numeric]
sweep_parameter = transverse_k
sweep_start = 0
sweep_stop = 6.283185307179586
sweep_points = 121
n_cells = 50
n_p = 600

[output]
formats = csv, json, svg
"""

_PHASE_DIAGRAM = """\
[run]
command = phase-diagram
diagram = {diagram}

[model]
variant = chern_x_obc
delta_onsite = 1
delta_stagger = 1

[numeric]
gamma_start = 0.05
gamma_stop = 6
gamma_points = 64
t1_start = 0.05
t1_stop = 3
t1_points = 64

[output]
formats = csv, json, svg
"""

RECIPES = {
    "fig2a": _SSH_SWEEP.format(t3=0, gamma=3, delta_onsite=0, n_obc=100, n_p=3500),
    "fig2b": _SSH_SWEEP.format(t3=0, gamma=3, delta_onsite=1, n_obc=100, n_p=3000),
    "fig2c": _SSH_SWEEP.format(t3=0.2, gamma=4 / 3, delta_onsite=0, n_obc=45, n_p=45),
    "fig2d": _SSH_SWEEP.format(t3=0.2, gamma=4 / 3, delta_onsite=1, n_obc=45, n_p=45),
    "fig3a": _CHERN_X_SWEEP.format(
        t1=1, t3=0, gamma=3, delta_onsite=1, delta_stagger=1, n_obc=80, n_p=3000
    ),
    "fig3b": _CHERN_X_SWEEP.format(
        t1=2, t3=0.5, gamma=0.8, delta_onsite=0.25, delta_stagger=2, n_obc=50, n_p=500
    ),
    "fig4a": _PHASE_DIAGRAM.format(diagram="pbc"),
    "fig4b": _PHASE_DIAGRAM.format(diagram="obc"),
    "fig5a": _CHERN_Y_SWEEP.format(variant="chern_y_obc_a"),
    "fig5b": _CHERN_Y_SWEEP.format(variant="chern_y_obc_b"),
}


def recipe_names() -> tuple:
    return tuple(sorted(RECIPES))


def recipe_text(name: str) -> str:
    """
    :raises ValueError: If there is no recipe with that name.
    """
    try:
        return RECIPES[name]
    except KeyError:
        raise ValueError(
            f"Unknown recipe '{name}', expected one of {', '.join(recipe_names())}"
        ) from None
