// Shared test plumbing: fixture loading and a hand-cranked fetch stub.
//
// The fixture files under tests/fixtures/ are verbatim responses recorded
// from a running pipeline service over real artifacts, so every expected
// number in these tests is a server-produced value, not one the UI derived.

import { readFileSync } from "node:fs";
import type { FetchLike } from "../src/api.js";
import type { Scheduler } from "../src/sweep.js";

export function fixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf8")) as T;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export interface PendingCall {
  url: string;
  init?: RequestInit;
  body: unknown; // parsed JSON request body, null for GETs
  resolve: (r: Response) => void;
  reject: (e: unknown) => void;
}

// Fetch stub whose responses are released by the test in any order it
// chooses. Abort signals are recorded but deliberately NOT honoured: a real
// server may well answer a request the client already gave up on, which is
// exactly the race the sequence numbers must win.
export class ManualFetch {
  calls: PendingCall[] = [];

  fetch: FetchLike = (url, init) => {
    return new Promise<Response>((resolve, reject) => {
      this.calls.push({
        url,
        init,
        body: typeof init?.body === "string" ? JSON.parse(init.body) : null,
        resolve,
        reject,
      });
    });
  };

  // All calls not yet released, oldest first.
  pending(): PendingCall[] {
    return this.calls.filter((c) => !("done" in c));
  }

  release(call: PendingCall, body: unknown, status = 200): void {
    (call as PendingCall & { done: boolean }).done = true;
    call.resolve(jsonResponse(body, status));
  }

  fail(call: PendingCall, err: unknown): void {
    (call as PendingCall & { done: boolean }).done = true;
    call.reject(err);
  }
}

// Immediate fetch: answers from a routing function as soon as it is called.
export function routedFetch(route: (url: string, body: unknown) => unknown): FetchLike {
  return (url, init) => {
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : null;
    return Promise.resolve(jsonResponse(route(url, body)));
  };
}

// Scheduler with a hand crank instead of a clock.
export class ManualScheduler {
  private tasks: (() => void)[] = [];

  schedule: Scheduler = (fn) => {
    this.tasks.push(fn);
    const mine = fn;
    return () => {
      this.tasks = this.tasks.filter((t) => t !== mine);
    };
  };

  // Run everything currently queued (new tasks queued by those runs wait).
  fire(): void {
    const batch = this.tasks;
    this.tasks = [];
    for (const t of batch) t();
  }

  pendingCount(): number {
    return this.tasks.length;
  }
}

export async function settle(): Promise<void> {
  // lets chained promise callbacks run
  for (let i = 0; i < 10; i++) await Promise.resolve();
}
