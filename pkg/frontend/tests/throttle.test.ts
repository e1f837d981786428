import { describe, expect, it } from "vitest";

import { translation, type Mat16 } from "../src/rigid.js";
import { PoseThrottle } from "../src/throttle.js";
import { FakeTimeline } from "./faketime.js";

function setup() {
  const time = new FakeTimeline();
  const sent: { at: number; pose: Mat16 }[] = [];
  const throttle = new PoseThrottle(
    (pose) => sent.push({ at: time.now(), pose }),
    30,
    time.now,
    time.schedule,
  );
  return { time, sent, throttle };
}

describe("PoseThrottle", () => {
  it("sends nothing without a gesture", () => {
    const { time, sent } = setup();
    time.advanceBy(1000);
    expect(sent).toHaveLength(0);
  });

  it("caps a 2 s continuous drag at 67 messages", () => {
    const { time, sent, throttle } = setup();
    // pointer moves every 5 ms for 2 s
    for (let i = 0; i * 5 < 2000; i++) {
      throttle.update(translation(i, 0, 0));
      time.advanceBy(5);
    }
    expect(sent.length).toBeGreaterThan(0);
    expect(sent.length).toBeLessThanOrEqual(67);
  });

  it("keeps at least 30 ms between messages", () => {
    const { time, sent, throttle } = setup();
    for (let i = 0; i < 200; i++) {
      throttle.update(translation(i, 0, 0));
      time.advanceBy(7);
    }
    throttle.finish(translation(999, 0, 0));
    time.advanceBy(100);
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i].at - sent[i - 1].at).toBeGreaterThanOrEqual(30);
    }
  });

  it("always delivers the terminal pose with its exact numbers", () => {
    const { time, sent, throttle } = setup();
    for (let i = 0; i < 10; i++) {
      throttle.update(translation(i, 0, 0));
      time.advanceBy(3);
    }
    const final = translation(123.456, -7.5, 0.001);
    throttle.finish(final);
    time.advanceBy(200);
    expect(sent[sent.length - 1].pose).toEqual(final);
  });

  it("sends the terminal pose immediately when the window is open", () => {
    const { time, sent, throttle } = setup();
    throttle.update(translation(1, 0, 0));
    time.advanceBy(50);
    const final = translation(2, 0, 0);
    throttle.finish(final);
    expect(sent).toHaveLength(2);
    expect(sent[1].at).toBe(50);
    expect(sent[1].pose).toEqual(final);
  });

  it("coalesces intermediate poses, newest wins", () => {
    const { time, sent, throttle } = setup();
    throttle.update(translation(1, 0, 0)); // leading send
    throttle.update(translation(2, 0, 0));
    throttle.update(translation(3, 0, 0));
    time.advanceBy(60);
    expect(sent).toHaveLength(2);
    expect(sent[1].pose).toEqual(translation(3, 0, 0));
  });
});
