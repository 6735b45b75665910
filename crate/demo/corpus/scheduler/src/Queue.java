package scheduler;

public class Queue {
    private final int[] items;
    private int head;
    private int tail;
    private int size;

    public Queue(int capacity) {
        items = new int[capacity];
    }

    public boolean isEmpty() {
        return size == 0;
    }

    public boolean isFull() {
        return size == items.length;
    }

    public void push(int value) {
        if (size < items.length) {
            items[tail] = value;
            tail = (tail + 1) % items.length;
            size = size + 1;
        }
    }

    public int pop() {
        int value = items[head];
        head = (head + 1) % items.length;
        size = size - 1;
        return value;
    }

    public int peekAt(int offset) {
        int index = (head + offset) % items.length;
        return items[index];
    }

    public int free() {
        int cap = items.length;
        return cap - size;
    }
}
