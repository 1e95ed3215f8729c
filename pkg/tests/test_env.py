"""Episode environment: transitions, step limits, closures, scripted replay."""

import numpy as np
import pytest

from outliner.env import (
    Action,
    EpisodeConfig,
    EpisodeFinished,
    InvalidPosition,
    OutlineEnv,
    StepTooLong,
    scripted_actions,
    scripted_rollout,
)
from outliner.geometry import PixelPoint, Polygon, raster_iou
from outliner.statemap import ActionKind, Phase

from conftest import square


def pen_down(x, y):
    return Action(ActionKind.PEN_DOWN, PixelPoint(x, y))


PEN_UP = Action(ActionKind.PEN_UP)
FINISH = Action(ActionKind.DRAW_FINISH)


@pytest.fixture()
def env(rgb_image):
    e = OutlineEnv()
    e.reset(rgb_image, (square(10, 10, 30),))
    return e


class TestActionValidation:
    def test_pen_down_needs_position(self):
        with pytest.raises(ValueError):
            Action(ActionKind.PEN_DOWN)

    @pytest.mark.parametrize("kind", [ActionKind.PEN_UP, ActionKind.DRAW_FINISH])
    def test_positionless_actions_reject_position(self, kind):
        with pytest.raises(ValueError):
            Action(kind, PixelPoint(1, 1))


class TestReset:
    def test_reset_builds_fresh_episode(self, rgb_image):
        env = OutlineEnv()
        obs = env.reset(rgb_image, (square(10, 10, 30),))
        assert not env.done
        assert env.steps_taken == 0
        assert env.state.phase == Phase.PEN_UP
        assert env.grid_size == (64, 64)
        assert env.boundary_map.max() == np.float32(1.0)
        assert obs.tensor().shape == (5, 64, 64)
        assert not obs.maps.map1.any()

    def test_uint8_images_are_normalized(self):
        img = np.full((8, 8, 3), 255, dtype=np.uint8)
        env = OutlineEnv()
        obs = env.reset(img)
        assert obs.image.dtype == np.float32
        assert obs.image.max() == np.float32(1.0)

    def test_bad_images_rejected(self):
        env = OutlineEnv()
        with pytest.raises(ValueError):
            env.reset(np.zeros((8, 8), dtype=np.float32))
        with pytest.raises(ValueError):
            env.reset(np.full((8, 8, 3), 2.0, dtype=np.float32))

    def test_observation_tensor_channel_order(self, rgb_image):
        env = OutlineEnv()
        obs = env.reset(rgb_image)
        t = obs.tensor()
        np.testing.assert_array_equal(t[0], rgb_image[:, :, 0])
        np.testing.assert_array_equal(t[2], rgb_image[:, :, 2])
        assert not t[3].any() and not t[4].any()


class TestStepTransitions:
    def test_first_pen_down_unconstrained_distance(self, env):
        outcome = env.step(pen_down(60, 60))
        assert env.state.phase == Phase.PEN_DOWN
        assert env.state.current == (PixelPoint(60, 60),)
        assert outcome.reward.penalty == 0.0

    def test_pen_down_extends_polyline(self, env):
        env.step(pen_down(10, 10))
        env.step(pen_down(40, 10))
        assert env.state.current == (PixelPoint(10, 10), PixelPoint(40, 10))
        assert env.state.last_pen == PixelPoint(40, 10)

    def test_step_longer_than_limit_rejected_without_mutation(self, env):
        env.step(pen_down(10, 10))
        before = env.state
        with pytest.raises(StepTooLong):
            env.step(pen_down(61, 10))  # 51 px
        assert env.state == before
        assert env.steps_taken == 1
        env.step(pen_down(60, 10))  # exactly 50 px is allowed

    def test_eighty_pixel_jump_rejected(self):
        img = np.zeros((128, 128, 3), dtype=np.float32)
        env = OutlineEnv()
        env.reset(img)
        env.step(pen_down(10, 10))
        with pytest.raises(StepTooLong):
            env.step(pen_down(90, 10))

    def test_off_grid_position_rejected(self, env):
        with pytest.raises(InvalidPosition):
            env.step(pen_down(64, 0))
        with pytest.raises(InvalidPosition):
            env.step(pen_down(0, -1))
        assert env.steps_taken == 0

    def test_pen_down_at_last_position_is_a_noop(self, env):
        env.step(pen_down(10, 10))
        outcome = env.step(pen_down(10, 10))
        assert env.state.current == (PixelPoint(10, 10),)
        assert outcome.reward.contour == 0.0
        assert env.steps_taken == 2

    def test_pen_up_without_polygon_is_penalized(self, env):
        outcome = env.step(PEN_UP)
        assert outcome.reward == outcome.reward.__class__(penalty=-1.0)
        assert env.state.phase == Phase.PEN_UP
        assert not env.done

    def test_finish_on_empty_truth_spec_example(self, rgb_image):
        env = OutlineEnv()
        env.reset(rgb_image)
        outcome = env.step(FINISH)
        assert outcome.done
        assert outcome.reward.total == -1.0
        assert env.state.phase == Phase.DRAW_FINISH

    def test_too_few_vertices_discarded_spec_example(self, env):
        env.step(pen_down(10, 10))
        env.step(pen_down(40, 10))
        outcome = env.step(PEN_UP)
        assert outcome.info["discarded_polygon"]
        assert outcome.reward.total == -1.0
        assert env.state.found == ()
        assert env.state.phase == Phase.PEN_UP

    def test_collinear_closure_discarded(self, env):
        env.step(pen_down(10, 10))
        env.step(pen_down(30, 10))
        env.step(pen_down(50, 10))
        outcome = env.step(PEN_UP)
        assert outcome.info["discarded_polygon"]
        assert outcome.reward.total == -1.0

    def test_valid_closure_earns_region_reward(self, env):
        for x, y in [(10, 10), (40, 10), (40, 40), (10, 40)]:
            env.step(pen_down(x, y))
        outcome = env.step(PEN_UP)
        assert len(env.state.found) == 1
        found = env.state.found[0]
        expected_iou = raster_iou(found, square(10, 10, 30), 64, 64)
        assert outcome.reward.region == pytest.approx(expected_iou)
        assert outcome.reward.contour > 0  # closing segment runs along the truth edge
        assert not env.done

    def test_finish_closes_pending_polygon(self, env):
        for x, y in [(10, 10), (40, 10), (40, 40), (10, 40)]:
            env.step(pen_down(x, y))
        outcome = env.step(FINISH)
        assert outcome.done
        assert len(env.state.found) == 1
        assert outcome.reward.region > 0.9

    def test_step_after_done_raises(self, env):
        env.step(FINISH)
        with pytest.raises(EpisodeFinished):
            env.step(PEN_UP)

    def test_max_steps_terminates(self, rgb_image):
        env = OutlineEnv(EpisodeConfig(max_steps=3))
        env.reset(rgb_image)
        env.step(pen_down(5, 5))
        env.step(pen_down(9, 5))
        outcome = env.step(pen_down(9, 9))
        assert outcome.done
        with pytest.raises(EpisodeFinished):
            env.step(PEN_UP)

    def test_replay_is_bit_identical(self, rgb_image):
        actions = [pen_down(10, 10), pen_down(40, 12), pen_down(38, 40), PEN_UP, FINISH]
        runs = []
        for _ in range(2):
            env = OutlineEnv()
            env.reset(rgb_image, (square(10, 10, 30),))
            runs.append([env.step(a) for a in actions])
        for a, b in zip(*runs):
            assert a.reward == b.reward
            assert a.done == b.done
            assert a.info == b.info
            assert np.array_equal(a.observation.maps.map1, b.observation.maps.map1)
            assert np.array_equal(a.observation.maps.map2, b.observation.maps.map2)


class TestScriptedActions:
    def test_stride_validation(self):
        truth = (square(10, 10, 30),)
        with pytest.raises(ValueError):
            scripted_actions(truth, 0.0)
        with pytest.raises(ValueError):
            scripted_actions(truth, 60.0)

    def test_script_shape(self):
        truth = (square(10, 10, 30), square(45, 45, 10))
        actions = scripted_actions(truth, 25.0)
        kinds = [a.kind for a in actions]
        assert kinds.count(ActionKind.PEN_UP) == 2
        assert kinds[-1] == ActionKind.DRAW_FINISH
        assert kinds.count(ActionKind.DRAW_FINISH) == 1

    def test_all_truth_vertices_are_visited(self):
        poly = Polygon((PixelPoint(10, 10), PixelPoint(48, 12), PixelPoint(40, 44), PixelPoint(8, 40)))
        actions = scripted_actions((poly,), 25.0)
        visited = {a.position for a in actions if a.kind == ActionKind.PEN_DOWN}
        assert set(poly.vertices) <= visited

    def test_consecutive_pen_downs_respect_the_limit(self):
        poly = Polygon((PixelPoint(0, 0), PixelPoint(200, 2), PixelPoint(198, 180), PixelPoint(2, 178)))
        actions = scripted_actions((poly,), 50.0)
        downs = [a.position for a in actions if a.kind == ActionKind.PEN_DOWN]
        for p, q in zip(downs, downs[1:]):
            assert p.distance_to(q) <= 50.0

    def test_square_self_trace_recovers_region_exactly(self, rgb_image):
        truth = (square(10, 10, 30),)
        env = OutlineEnv()
        outcomes = scripted_rollout(env, rgb_image, truth, 30.0)
        closing = [o for o in outcomes if o.info["action"] == "pen-up"]
        assert closing[-1].reward.region == 1.0  # found ring equals the truth ring
        assert outcomes[-1].done

    def test_two_objects_partial_trace_halves_region(self, rgb_image):
        truth = (square(5, 5, 20), square(35, 35, 20))
        env = OutlineEnv()
        env.reset(rgb_image, truth)
        for v in truth[0].vertices:
            env.step(Action(ActionKind.PEN_DOWN, v))
        outcome = env.step(FINISH)
        assert outcome.reward.region == pytest.approx(0.5)

    def test_scripted_rollout_on_a_quad(self, rgb_image):
        truth = (Polygon((PixelPoint(8, 8), PixelPoint(50, 10), PixelPoint(52, 52), PixelPoint(10, 50))),)
        env = OutlineEnv()
        outcomes = scripted_rollout(env, rgb_image, truth, 20.0)
        assert env.done
        assert len(env.state.found) == 1
        assert raster_iou(env.state.found[0], truth[0], 64, 64) > 0.95
        contour_steps = [o for o in outcomes if o.info["action"] != "draw-finish"]
        assert all(o.reward.contour > 0 for o in contour_steps)
