'use strict';

// Delays calls to fn until wait ms have passed without another call.
function debounce(fn, wait, options = {}) {
  let timer = null;
  let lastArgs = null;
  const leading = Boolean(options.leading);

  function invoke() {
    const args = lastArgs;
    lastArgs = null;
    return fn.apply(this, args);
  }

  function debounced(...args) {
    lastArgs = args;
    const callNow = leading && timer === null;
    clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      if (!leading && lastArgs !== null) {
        invoke();
      }
    }, wait);
    if (callNow) {
      return invoke();
    }
    return undefined;
  }

  debounced.cancel = function cancel() {
    clearTimeout(timer);
    timer = null;
    lastArgs = null;
  };

  debounced.flush = function flush() {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
      return invoke();
    }
    return undefined;
  };

  return debounced;
}

module.exports = { debounce };
